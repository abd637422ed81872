"""Transforms, field containers, and the raw field file format."""

import numpy as np
import pytest

from bqbox import (
    DiagnosticsError,
    FieldIOError,
    GridSpec,
    ScalarField,
    SpectralField,
    State,
    TensorField,
    VectorField,
    forward_transform,
    inverse_transform,
    read_field,
    spectral_divergence_residual,
    write_field,
    zeros_like_state,
)
from bqbox.presets import single_mode_scalar, taylor_green


class TestGridSpec:
    def test_valid(self):
        g = GridSpec(n=3, N=32, L=2.5)
        assert g.shape == (32, 32, 32)
        assert g.cell_volume == pytest.approx((2.5 / 32) ** 3)

    @pytest.mark.parametrize("kwargs", [
        dict(n=4, N=16, L=1.0),
        dict(n=1, N=16, L=1.0),
        dict(n=2, N=12, L=1.0),
        dict(n=2, N=4, L=1.0),
        dict(n=2, N=16, L=0.0),
        dict(n=2, N=16, L=-1.0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(DiagnosticsError):
            GridSpec(**kwargs)

    def test_wave_integers_range(self, grid2d):
        k = grid2d.wave_integers
        assert k.min() == -grid2d.N // 2
        assert k.max() == grid2d.N // 2 - 1


def _direct_dft(values, grid):
    """O(N^{2n}) direct summation oracle for the normalized forward DFT."""
    N = grid.N
    idx = np.stack(np.meshgrid(*([np.arange(N)] * grid.n), indexing="ij"))
    coeffs = np.zeros(grid.shape, dtype=complex)
    for kidx in np.ndindex(grid.shape):
        k = np.array([grid.wave_integers[(j,) + kidx] for j in range(grid.n)])
        phase = np.exp(-2j * np.pi * np.tensordot(k, idx, axes=1) / N)
        coeffs[kidx] = np.sum(values * phase) / N**grid.n
    return coeffs


class TestForwardTransform:
    def test_constant_field(self, grid2d):
        f = ScalarField(grid2d, np.full(grid2d.shape, 3.25))
        spec = forward_transform(f)
        assert spec.coeffs[0, 0] == pytest.approx(3.25)
        rest = spec.coeffs.copy()
        rest[0, 0] = 0.0
        assert np.max(np.abs(rest)) < 1e-14

    def test_cosine_mode(self, grid2d):
        f = single_mode_scalar(grid2d, k=(1, 0))
        spec = forward_transform(f)
        assert spec.coeffs[1, 0] == pytest.approx(0.5, abs=1e-14)
        assert spec.coeffs[-1, 0] == pytest.approx(0.5, abs=1e-14)
        other = spec.coeffs.copy()
        other[1, 0] = other[-1, 0] = 0.0
        assert np.max(np.abs(other)) < 1e-14

    def test_direct_dft_oracle(self):
        grid = GridSpec(n=2, N=8, L=1.7)
        rng = np.random.Generator(np.random.Philox(123))
        f = ScalarField(grid, rng.standard_normal(grid.shape))
        got = forward_transform(f).coeffs
        want = _direct_dft(f.values, grid)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_round_trip(self, grid2d):
        rng = np.random.Generator(np.random.Philox(7))
        f = ScalarField(grid2d, rng.standard_normal(grid2d.shape))
        back = inverse_transform(forward_transform(f))
        assert np.max(np.abs(back.values - f.values)) <= 1e-12 * np.max(np.abs(f.values))

    def test_rejects_non_finite(self, grid2d):
        vals = np.zeros(grid2d.shape)
        vals[0, 0] = np.nan
        with pytest.raises(DiagnosticsError):
            forward_transform(ScalarField(grid2d, vals))

    def test_parseval(self, grid2d):
        rng = np.random.Generator(np.random.Philox(8))
        f = ScalarField(grid2d, rng.standard_normal(grid2d.shape))
        spec = forward_transform(f)
        lhs = np.sum(f.values**2) * grid2d.cell_volume
        rhs = grid2d.L**grid2d.n * np.sum(np.abs(spec.coeffs) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_linearity(self, grid2d):
        rng = np.random.Generator(np.random.Philox(9))
        f = rng.standard_normal(grid2d.shape)
        g = rng.standard_normal(grid2d.shape)
        lhs = forward_transform(ScalarField(grid2d, 2.0 * f + 0.3 * g)).coeffs
        rhs = (
            2.0 * forward_transform(ScalarField(grid2d, f)).coeffs
            + 0.3 * forward_transform(ScalarField(grid2d, g)).coeffs
        )
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(lhs))


class TestInverseTransform:
    def test_zero(self, grid2d):
        spec = SpectralField(grid2d, np.zeros(grid2d.shape, dtype=complex))
        assert np.all(inverse_transform(spec).values == 0.0)

    def test_hermitian_pair_gives_cosine(self, grid2d):
        coeffs = np.zeros(grid2d.shape, dtype=complex)
        coeffs[1, 0] = 0.5
        coeffs[-1, 0] = 0.5
        got = inverse_transform(SpectralField(grid2d, coeffs)).values
        x = grid2d.coordinates[0]
        want = np.cos(2.0 * np.pi * x / grid2d.L)
        assert np.max(np.abs(got - want)) < 1e-13

    def test_delta_at_zero(self, grid2d):
        coeffs = np.zeros(grid2d.shape, dtype=complex)
        coeffs[0, 0] = -1.5
        got = inverse_transform(SpectralField(grid2d, coeffs)).values
        assert np.max(np.abs(got + 1.5)) < 1e-14

    def test_symmetry_violation_names_wavevector(self, grid2d):
        coeffs = np.zeros(grid2d.shape, dtype=complex)
        coeffs[2, 1] = 1.0  # no conjugate partner
        with pytest.raises(DiagnosticsError, match=r"wavevector"):
            inverse_transform(SpectralField(grid2d, coeffs))


class TestState:
    def test_divergence_residual(self, grid2d):
        tg = taylor_green(grid2d)
        assert spectral_divergence_residual(tg) <= 1e-10
        bad = VectorField(grid2d, np.stack([grid2d.coordinates[0] * 0 + np.sin(
            2 * np.pi * grid2d.coordinates[0] / grid2d.L), np.zeros(grid2d.shape)]))
        assert spectral_divergence_residual(bad) > 1e-3

    def test_zero_state(self, grid2d):
        s = zeros_like_state(grid2d)
        assert s.max_norm() == 0.0
        assert spectral_divergence_residual(s.u) == 0.0

    def test_grid_mismatch(self, grid2d):
        other = GridSpec(n=2, N=32, L=1.0)
        with pytest.raises(DiagnosticsError):
            State(
                VectorField(grid2d, np.zeros((2,) + grid2d.shape)),
                ScalarField(other, np.zeros(other.shape)),
            )


class TestFieldFiles:
    @pytest.mark.parametrize("maker", ["scalar", "vector", "tensor", "state"])
    def test_bit_exact_round_trip(self, tmp_path, grid2d, maker):
        rng = np.random.Generator(np.random.Philox(21))
        if maker == "scalar":
            obj = ScalarField(grid2d, rng.standard_normal(grid2d.shape))
        elif maker == "vector":
            obj = VectorField(grid2d, rng.standard_normal((2,) + grid2d.shape))
        elif maker == "tensor":
            obj = TensorField(grid2d, rng.standard_normal((2, 2) + grid2d.shape))
        else:
            obj = State(
                VectorField(grid2d, rng.standard_normal((2,) + grid2d.shape)),
                ScalarField(grid2d, rng.standard_normal(grid2d.shape)),
            )
        path = tmp_path / "field.bqf"
        write_field(path, obj)
        back = read_field(path)
        assert type(back) is type(obj)
        if maker == "state":
            assert np.array_equal(back.u.values, obj.u.values)
            assert np.array_equal(back.theta.values, obj.theta.values)
        else:
            assert np.array_equal(back.values, obj.values)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.bqf"
        p.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(FieldIOError, match="magic"):
            read_field(p)

    def test_truncated(self, tmp_path, grid2d):
        p = tmp_path / "trunc.bqf"
        write_field(p, ScalarField(grid2d, np.ones(grid2d.shape)))
        data = p.read_bytes()
        p.write_bytes(data[:-16])
        with pytest.raises(FieldIOError):
            read_field(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FieldIOError):
            read_field(tmp_path / "absent.bqf")
