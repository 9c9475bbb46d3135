"""PCA fits on both code paths, plus serialization."""

import numpy as np
import pytest

import vdv.pca as pca_mod
from vdv.errors import DataError, ModelFileError
from vdv.pca import (
    PcaModel,
    fit_pca,
    pca_from_bytes,
    pca_reconstruct,
    pca_to_bytes,
    pca_transform,
)


def force_path(monkeypatch, which):
    """Route every fit through the direct-SVD or the Gram-trick branch."""
    ratio = {"direct": 1e12, "gram": 0.0}[which]
    monkeypatch.setattr(pca_mod, "_GRAM_RATIO", ratio)


class TestAnalyticCases:
    def test_two_points(self):
        x = np.array([[0.0, 0.0], [2.0, 2.0]])
        model = fit_pca(x, 1)
        assert model.mean == pytest.approx([1.0, 1.0])
        # the single component is the normalized diagonal, positive by sign rule
        assert model.components[0] == pytest.approx([np.sqrt(0.5)] * 2)
        # singular value: centered points are +-(1,1), norm sqrt(2) each
        assert model.singular_values[0] == pytest.approx(2.0)

    def test_axis_aligned_variance_order(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((200, 3)) * np.array([5.0, 1.0, 0.1])
        model = fit_pca(x, 3)
        # components come out in variance order, aligned with the axes
        assert abs(model.components[0][0]) > 0.99
        assert abs(model.components[1][1]) > 0.99
        assert abs(model.components[2][2]) > 0.99
        assert np.all(np.diff(model.singular_values) <= 0)


@pytest.mark.parametrize("path", ["direct", "gram"])
class TestFitProperties:
    def test_orthonormal_rows(self, rng, monkeypatch, path):
        force_path(monkeypatch, path)
        for trial in range(4):
            n = int(rng.integers(5, 60))
            d = int(rng.integers(2, 40))
            x = rng.standard_normal((n, d))
            model = fit_pca(x, "full")
            c = model.components
            assert c.shape[0] == min(n, d)
            assert np.abs(c @ c.T - np.eye(c.shape[0])).max() <= 1e-8

    def test_full_rank_reconstruction(self, rng, monkeypatch, path):
        force_path(monkeypatch, path)
        x = rng.standard_normal((30, 12))
        model = fit_pca(x, "full")
        back = pca_reconstruct(model, pca_transform(model, x))
        scale = np.abs(x).max()
        assert np.abs(back - x).max() <= 1e-6 * scale

    def test_variance_matches_singular_values(self, rng, monkeypatch, path):
        force_path(monkeypatch, path)
        x = rng.standard_normal((40, 9))
        model = fit_pca(x, "full")
        xc = x - x.mean(axis=0)
        total = float(np.sum(xc * xc))
        sv2 = float(np.sum(model.singular_values**2))
        assert abs(sv2 - total) <= 1e-6 * total

    def test_projection_variance_is_sv_squared(self, rng, monkeypatch, path):
        force_path(monkeypatch, path)
        x = rng.standard_normal((25, 6))
        model = fit_pca(x, "full")
        z = pca_transform(model, x)
        per_comp = np.sum(z * z, axis=0)
        assert np.allclose(per_comp, model.singular_values**2, rtol=1e-8, atol=1e-8)

    def test_sign_convention(self, rng, monkeypatch, path):
        force_path(monkeypatch, path)
        x = rng.standard_normal((20, 7))
        model = fit_pca(x, "full")
        for row in model.components:
            assert row[int(np.argmax(np.abs(row)))] > 0


class TestPathAgreement:
    def test_same_subspace_both_paths(self, rng, monkeypatch):
        """The two branches may order null directions differently, but on a
        full-rank tall-enough problem they must agree up to sign already
        fixed, i.e. exactly, within float tolerance."""
        x = rng.standard_normal((20, 10))
        force_path(monkeypatch, "direct")
        direct = fit_pca(x, 5)
        force_path(monkeypatch, "gram")
        gram = fit_pca(x, 5)
        assert np.allclose(direct.mean, gram.mean)
        assert np.allclose(direct.singular_values, gram.singular_values, rtol=1e-9)
        assert np.abs(direct.components - gram.components).max() <= 1e-7

    def test_default_ratio_picks_gram_for_wide(self, rng):
        # dim 40 > 1.5 * 8 samples: the Gram branch must handle it exactly
        x = rng.standard_normal((8, 40))
        model = fit_pca(x, "full")
        assert model.n_components == 8
        c = model.components
        assert np.abs(c @ c.T - np.eye(8)).max() <= 1e-8
        # centering caps the data rank at 7; the 8th is a zero-sv completion
        assert int(np.sum(model.singular_values > 1e-9)) == 7
        assert model.singular_values[-1] == 0.0


class TestCentering:
    def test_rank_drop_from_centering(self, rng, monkeypatch):
        force_path(monkeypatch, "gram")
        x = rng.standard_normal((6, 30))
        model = fit_pca(x, "full")
        # 6 samples centered span a 5-dimensional subspace
        assert int(np.sum(model.singular_values > 1e-9)) == 5
        # completed direction is orthogonal to the data rows
        xc = x - model.mean
        null = model.components[-1]
        assert np.abs(xc @ null).max() <= 1e-8 * np.abs(xc).max()

    def test_duplicate_rows_drop_rank(self, rng, monkeypatch):
        force_path(monkeypatch, "gram")
        base = rng.standard_normal((3, 20))
        x = np.vstack([base, base[0]])
        model = fit_pca(x, "full")
        assert int(np.sum(model.singular_values > 1e-9)) == 2

    def test_transform_subtracts_mean(self, rng):
        x = rng.standard_normal((10, 4)) + 100.0
        model = fit_pca(x, 2)
        z = pca_transform(model, x)
        assert np.abs(z.mean(axis=0)).max() <= 1e-9 * 100.0


class TestValidation:
    def test_needs_two_samples(self):
        with pytest.raises(DataError):
            fit_pca(np.zeros((1, 4)), 1)

    def test_component_bounds(self, rng):
        x = rng.standard_normal((5, 3))
        with pytest.raises(DataError):
            fit_pca(x, 0)
        with pytest.raises(DataError):
            fit_pca(x, 4)

    def test_transform_dim_check(self, rng):
        model = fit_pca(rng.standard_normal((6, 4)), 2)
        with pytest.raises(DataError):
            pca_transform(model, rng.standard_normal((3, 5)))
        with pytest.raises(DataError):
            pca_reconstruct(model, rng.standard_normal((3, 3)))

    def test_model_validation(self):
        with pytest.raises(DataError):
            PcaModel(
                mean=np.zeros(3),
                components=np.zeros((0, 3)),
                singular_values=np.zeros(0),
            )
        with pytest.raises(DataError):
            PcaModel(
                mean=np.zeros(3),
                components=np.eye(3),
                singular_values=np.array([1.0, 2.0, 3.0]),  # increasing
            )


class TestSerialization:
    def test_round_trip(self, rng):
        model = fit_pca(rng.standard_normal((12, 5)), 4)
        clone = pca_from_bytes(pca_to_bytes(model))
        assert clone == model

    def test_bad_magic(self):
        with pytest.raises(ModelFileError, match="magic"):
            pca_from_bytes(b"WHAT" + bytes(16))

    def test_length_mismatch(self, rng):
        blob = pca_to_bytes(fit_pca(rng.standard_normal((6, 3)), 2))
        with pytest.raises(ModelFileError, match="length"):
            pca_from_bytes(blob + b"\x00" * 8)
