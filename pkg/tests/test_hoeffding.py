import itertools

import numpy as np
import pytest

from maxscore.arrays import MultiIndexGrid, materialize
from maxscore.dgp import DgpSpec
from maxscore.hoeffding import (
    decompose,
    expectation_exact,
    expectation_mc,
    patterns,
    project_exact,
    project_mc,
)

_ROW, _COL, _CELL = (1, 0), (0, 1), (1, 1)


def f_sum(br, bc, bl):
    return br + bc + bl


def g_prod(br, bc, bl):
    return (br - 0.5) * (bc - 0.5)


class TestPatterns:
    def test_order(self):
        assert patterns(2) == [(0, 1), (1, 0), (1, 1)]

    def test_k3_count(self):
        assert len(patterns(3)) == 7


class TestProjectExact:
    def test_row_projection_of_sum(self):
        # E[f | b_r = 1] - Ef = (1 + 1) - 3/2
        assert project_exact(f_sum, _ROW, {_ROW: 1}) == 0.5
        assert project_exact(f_sum, _ROW, {_ROW: 0}) == -0.5

    def test_product_has_no_first_order_part(self):
        for bit in (0, 1):
            assert project_exact(g_prod, _ROW, {_ROW: bit}) == 0.0
            assert project_exact(g_prod, _COL, {_COL: bit}) == 0.0

    def test_product_full_projection(self):
        bits = {_ROW: 1, _COL: 1, _CELL: 0}
        assert project_exact(g_prod, _CELL, bits) == 0.25

    def test_centering_in_every_dimension(self):
        # for each dimension l in the support of e, averaging over every bit
        # whose pattern touches l (remaining bits held) gives zero exactly
        for e in patterns(2):
            slots = [p for p in patterns(2) if all(a <= b for a, b in zip(p, e))]
            for l in (0, 1):
                if e[l] == 0:
                    continue
                avg = [p for p in slots if p[l] == 1]
                held = [p for p in slots if p[l] == 0]
                for fixed_bits in itertools.product((0, 1), repeat=len(held)):
                    for f in (f_sum, g_prod):
                        total = 0.0
                        for combo in itertools.product((0, 1), repeat=len(avg)):
                            bits = dict(zip(held, fixed_bits))
                            bits.update(dict(zip(avg, combo)))
                            total += project_exact(f, e, bits)
                        assert total == pytest.approx(0.0, abs=1e-14)

    def test_rejects_unknown_pattern(self):
        with pytest.raises(ValueError):
            project_exact(f_sum, (0, 0), {})


class TestDecomposeExact:
    def test_identity_residual_small_grids(self):
        spec = DgpSpec(variant="discrete-test")
        rng = np.random.default_rng(0)
        for _ in range(100):
            n1, n2 = rng.integers(2, 9, size=2)
            seed = int(rng.integers(0, 2**31))
            data = materialize(spec, MultiIndexGrid((int(n1), int(n2))), seed)
            table = decompose(data, spec, lambda br, bc, bl: br + bc + bl - 1.5)
            assert abs(table.residual) < 1e-12

    def test_requires_discrete(self):
        spec = DgpSpec(variant="add-shock")
        data = materialize(spec, MultiIndexGrid((3, 3)), seed=0)
        with pytest.raises(ValueError):
            decompose(data, spec, f_sum, mode="exact")

    def test_variance_scaling_in_rows(self):
        # H^(1,0) is a mean over N1 rows: its seed-to-seed variance is ~1/N1
        spec = DgpSpec(variant="discrete-test")
        variances = []
        sizes = (10, 20, 40, 80)
        for n1 in sizes:
            vals = [
                decompose(
                    materialize(spec, MultiIndexGrid((n1, 2)), seed=1000 + s),
                    spec,
                    f_sum,
                ).h[_ROW]
                for s in range(120)
            ]
            variances.append(np.var(vals, ddof=1))
        slope = np.polyfit(np.log(sizes), np.log(variances), 1)[0]
        assert -1.2 < slope < -0.8


class TestProjectMc:
    def test_full_pattern_conditioning_is_exact(self):
        # with every channel fixed no integration remains: the top-level
        # conditional mean is the functional itself, with zero MC error
        spec = DgpSpec(variant="add-shock")
        data = materialize(spec, MultiIndexGrid((2, 2)), seed=5)
        from maxscore.hoeffding import _conditional_mean_mc, _row_latents

        fixed = {}
        for p in patterns(2):
            fixed.update(_row_latents(data.store, spec, p, (1, 1)))
        f = lambda y, x: np.asarray(y, dtype=np.float64)
        v, se = _conditional_mean_mc(spec, f, _CELL, fixed, draws=200, seed=2)
        assert se == 0.0
        assert v == float(data.y[0])

    def test_mult_scale_row_projection_centered(self):
        # E[y] = 0 by symmetry, so the row projection averages to zero over
        # the law of the row latents
        spec = DgpSpec(variant="mult-scale")
        from maxscore.arrays import LatentStore
        from maxscore.dgp import channel_map

        store = LatentStore(seed=17)
        vals, ses = [], []
        for i in range(1, 31):
            fixed = {
                (_ROW, ch): store.uniform_array(_ROW, np.array([[i, 0]]), ch)[0]
                for ch in channel_map(spec)[_ROW]
            }
            v, se = project_mc(spec, lambda y, x: y, _ROW, fixed,
                               draws=2000, seed=100 + i, ef=0.0)
            vals.append(v)
            ses.append(se)
        mean = np.mean(vals)
        se_mean = np.sqrt(np.var(vals, ddof=1) / len(vals) + np.mean(ses) ** 2 / len(vals))
        assert abs(mean) < 3 * se_mean + 1e-3

    def test_iid_row_projection_vanishes(self):
        # no row-level latents exist, so conditioning is vacuous
        spec = DgpSpec(variant="iid")
        v, se = project_mc(spec, lambda y, x: y, _ROW, {}, draws=2000, seed=4, ef=None)
        assert abs(v) < 3 * np.sqrt(se**2 + (2000**-0.5) ** 2) + 1e-2

    def test_draw_floor(self):
        spec = DgpSpec(variant="iid")
        with pytest.raises(ValueError):
            project_mc(spec, lambda y, x: y, _ROW, {}, draws=50)

    def test_discrete_rejected(self):
        with pytest.raises(ValueError):
            project_mc(DgpSpec(variant="discrete-test"), lambda y, x: y, _ROW, {})

    def test_se_scales_with_draws(self):
        spec = DgpSpec(variant="add-shock")
        data = materialize(spec, MultiIndexGrid((2, 2)), seed=8)
        from maxscore.hoeffding import _row_latents

        fixed = _row_latents(data.store, spec, _ROW, (1, 0))
        draw_grid = (100, 1000, 10000)
        ses = [
            project_mc(spec, lambda y, x: y, _ROW, fixed, draws=d, seed=6, ef=0.0)[1]
            for d in draw_grid
        ]
        slope = np.polyfit(np.log(draw_grid), np.log(ses), 1)[0]
        assert -0.6 < slope < -0.4


class TestDecomposeMc:
    def test_residual_within_mc_tolerance(self):
        spec = DgpSpec(variant="add-shock")
        data = materialize(spec, MultiIndexGrid((3, 3)), seed=5)
        table = decompose(data, spec, lambda y, x: y, mode="mc", draws=2000, seed=3)
        tol = 5 * np.sqrt(sum(s**2 for s in table.se.values())) + 0.02
        assert abs(table.residual) < tol

    def test_mc_mode_rejects_discrete(self):
        spec = DgpSpec(variant="discrete-test")
        data = materialize(spec, MultiIndexGrid((3, 3)), seed=0)
        with pytest.raises(ValueError):
            decompose(data, spec, lambda y, x: y, mode="mc")

    def test_unknown_mode(self):
        spec = DgpSpec(variant="add-shock")
        data = materialize(spec, MultiIndexGrid((2, 2)), seed=0)
        with pytest.raises(ValueError):
            decompose(data, spec, lambda y, x: y, mode="bogus")
