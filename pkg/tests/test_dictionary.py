import numpy as np
import pytest

from hsirpca import (
    DataError,
    SpectrumRecord,
    TargetDictionary,
    build_dictionary,
    load_spectra,
    save_spectra,
)


def make_records(rng, n=3, bands=8, with_wavelengths=True):
    wl = np.linspace(0.4, 2.5, bands) if with_wavelengths else None
    return [SpectrumRecord(name=f"mat_{i}",
                           reflectance=rng.random(bands),
                           wavelengths=wl)
            for i in range(n)]


def test_record_validation():
    with pytest.raises(ValueError):
        SpectrumRecord(name="", reflectance=np.ones(3))
    with pytest.raises(ValueError):
        SpectrumRecord(name="a", reflectance=np.ones((3, 1)))
    with pytest.raises(ValueError):
        SpectrumRecord(name="a", reflectance=np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        SpectrumRecord(name="a", reflectance=np.ones(3),
                       wavelengths=np.ones(4))


def test_csv_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(40)
    for i, with_wl in enumerate([True, False]):
        records = make_records(rng, with_wavelengths=with_wl)
        path = tmp_path / f"spec{i}.csv"
        save_spectra(records, path)
        back = load_spectra(path)
        assert [r.name for r in back] == [r.name for r in records]
        for a, b in zip(back, records):
            np.testing.assert_array_equal(a.reflectance, b.reflectance)
            if with_wl:
                np.testing.assert_array_equal(a.wavelengths, b.wavelengths)
            else:
                assert a.wavelengths is None


def test_csv_header_decides_wavelength_column(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("wavelength_um,alpha\n0.4,0.1\n0.5,0.2\n")
    (rec,) = load_spectra(path)
    assert rec.name == "alpha"
    np.testing.assert_array_equal(rec.wavelengths, [0.4, 0.5])
    np.testing.assert_array_equal(rec.reflectance, [0.1, 0.2])


def test_csv_errors(tmp_path):
    cases = {
        "empty.csv": ("", DataError),
        "no_samples.csv": ("wavelength_um\n0.4\n", DataError),
        "dup.csv": ("a,a\n1,2\n", DataError),
        "header_only.csv": ("a,b\n", DataError),
    }
    for fname, (body, exc) in cases.items():
        path = tmp_path / fname
        path.write_text(body)
        with pytest.raises(exc):
            load_spectra(path)


def test_csv_ragged_row_names_line(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("a,b\n1,2\n3\n")
    with pytest.raises(DataError, match="3"):
        load_spectra(path)


def test_csv_non_numeric_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a\n1\noops\n")
    with pytest.raises(DataError, match="oops"):
        load_spectra(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_spectra(tmp_path / "absent.csv")


def test_build_dictionary_columns_in_order():
    rng = np.random.default_rng(41)
    records = make_records(rng, n=4, bands=6)
    d = build_dictionary(records, expected_bands=6)
    assert d.spectra.shape == (6, 4)
    assert d.labels == tuple(r.name for r in records)
    for j, rec in enumerate(records):
        np.testing.assert_array_equal(d.spectra[:, j], rec.reflectance)
    assert not d.normalized


def test_build_dictionary_normalize():
    rng = np.random.default_rng(42)
    records = make_records(rng, n=3, bands=5)
    d = build_dictionary(records, expected_bands=5, normalize=True)
    np.testing.assert_allclose(np.linalg.norm(d.spectra, axis=0),
                               np.ones(3), atol=1e-12)
    assert d.normalized
    # direction preserved
    raw = build_dictionary(records, expected_bands=5)
    for j in range(3):
        cos = d.spectra[:, j] @ raw.spectra[:, j] \
            / np.linalg.norm(raw.spectra[:, j])
        np.testing.assert_allclose(cos, 1.0, atol=1e-12)


def test_build_dictionary_band_mismatch_names_record():
    rng = np.random.default_rng(43)
    records = make_records(rng, n=2, bands=5)
    with pytest.raises(DataError, match="mat_0"):
        build_dictionary(records, expected_bands=7)


def test_build_dictionary_zero_spectrum_rejected():
    records = [SpectrumRecord(name="blank", reflectance=np.zeros(4))]
    with pytest.raises(DataError, match="blank"):
        build_dictionary(records, expected_bands=4, normalize=True)


def test_build_dictionary_empty():
    with pytest.raises(DataError):
        build_dictionary([], expected_bands=4)


def test_target_dictionary_validation():
    with pytest.raises(ValueError):
        TargetDictionary(spectra=np.ones((3, 2)), labels=("a",))
    with pytest.raises(ValueError):
        TargetDictionary(spectra=np.ones((3, 2)), labels=("a", "a"))
    d = TargetDictionary(spectra=np.ones((3, 2)), labels=("a", "b"))
    assert d.bands == 3
    assert d.size == 2


def test_save_requires_shared_wavelengths(tmp_path):
    r1 = SpectrumRecord(name="a", reflectance=np.ones(3),
                        wavelengths=np.array([1.0, 2.0, 3.0]))
    r2 = SpectrumRecord(name="b", reflectance=np.ones(3),
                        wavelengths=np.array([1.0, 2.0, 4.0]))
    with pytest.raises(DataError):
        save_spectra([r1, r2], tmp_path / "s.csv")
    r3 = SpectrumRecord(name="b", reflectance=np.ones(3))
    with pytest.raises(DataError):
        save_spectra([r1, r3], tmp_path / "s.csv")
