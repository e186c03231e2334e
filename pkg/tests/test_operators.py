import numpy as np
import pytest
from scipy.sparse.linalg import expm_multiply

from bulkq.model import GridConfig, QueueConfig, StateVector, marginals
from bulkq.operators import apply_phi, assemble, boundary_trace, dump_triplets, psi
from bulkq.transient import uniformization


def test_lambda_zero_example():
    cfg = QueueConfig(1, 1, 1.0)
    g = GridConfig(1, 1.0, 2)
    op = assemble(cfg, g, 0.0)
    tl, tr, bl, _ = op.blocks()
    assert np.array_equal(tl, [[0.0]])
    assert np.allclose(tr, [[g.dx, g.dx]])
    assert not bl.any()


def test_top_left_block():
    op = assemble(QueueConfig(2, 3, 1.0), GridConfig(4, 1.0, 3), 3.0)
    tl, tr, bl, _ = op.blocks()
    assert np.array_equal(tl, [[-3.0, 0.0], [3.0, -3.0]])
    # M couples idle r to busy level r only
    M = 3
    for r in range(2):
        row = tr[r].reshape(4, M)
        assert np.allclose(row[r], 1.0 * op.dx)
        assert not np.delete(row, r, axis=0).any()
    assert not bl.any()


def test_bottom_right_block_structure():
    lam, mu = 0.7, 1.3
    g = GridConfig(3, 1.0, 4)
    op = assemble(QueueConfig(1, 2, mu), g, lam)
    _, _, _, br = op.blocks()
    M = g.M
    for n in range(3):
        D = br[n * M:(n + 1) * M, n * M:(n + 1) * M]
        assert np.allclose(np.diag(D), -(lam + mu) - 1 / g.dx)
        assert np.allclose(np.diag(D, -1), 1 / g.dx)
        if n > 0:
            sub = br[n * M:(n + 1) * M, (n - 1) * M:n * M]
            assert np.allclose(sub, lam * np.eye(M))


def test_psi_unit_integral():
    g = GridConfig(1, 40.0, 4000)
    assert psi(np.exp(-g.midpoints), g) == pytest.approx(1.0, abs=1e-4)


def test_apply_phi_examples():
    cfg = QueueConfig(2, 3, 3.0)
    g = GridConfig(8, 2.0, 20)
    assert not apply_phi(cfg, g, 2.0, StateVector.initial(cfg, g)).any()

    s = StateVector.zeros(cfg, g)
    s.idle[1] = 1.0
    out = apply_phi(cfg, g, 2.0, s)
    assert out[0] == 2.0 and not out[1:].any()

    s = StateVector.zeros(cfg, g)
    s.busy[2] = 1.0 / g.x_max
    out = apply_phi(cfg, g, 2.0, s)
    assert out[0] == pytest.approx(3.0) and not out[1:].any()

    s = StateVector.zeros(cfg, g)
    s.busy[5] = 1.0 / g.x_max
    out = apply_phi(cfg, g, 2.0, s)
    assert out[2] == pytest.approx(3.0) and out.sum() == pytest.approx(3.0)


def test_apply_phi_matches_matrix():
    cfg = QueueConfig(2, 3, 1.7)
    g = GridConfig(9, 2.0, 15)
    rng = np.random.default_rng(4)
    s = StateVector(rng.random(2), rng.random((9, 15)))
    op = assemble(cfg, g, 0.9)
    assert np.allclose(op.Phi @ s.flat(), apply_phi(cfg, g, 0.9, s), rtol=1e-13)
    assert np.array_equal(op.L_trace @ s.flat(), boundary_trace(s, g))


def test_boundary_trace_examples():
    cfg = QueueConfig(1, 3, 1.0)
    g = GridConfig(5, 1.0, 10)
    s = StateVector.zeros(cfg, g)
    assert not boundary_trace(s, g).any()
    s.busy[3, 0] = 5.0
    assert list(boundary_trace(s, g)) == [0, 0, 0, 5.0, 0]

    errs = []
    for M in (100, 200, 400):
        g = GridConfig(1, 10.0, M)
        s = StateVector(np.zeros(1), np.exp(-3.5 * g.midpoints)[None, :])
        v = boundary_trace(s, g)[0]
        assert v == pytest.approx(np.exp(-3.5 * g.dx / 2), rel=1e-14)
        errs.append(1 - v)
    assert errs[1] < errs[0] and errs[2] < errs[1]


@pytest.mark.parametrize("k,B,lam", [(1, 1, 1.0), (2, 3, 0.8), (3, 5, 2.0)])
def test_generator_conservation_and_positivity(k, B, lam):
    g = GridConfig(12, 3.0, 15)
    op = assemble(QueueConfig(k, B, 1.3), g, lam)
    Gm = op.mass_generator().toarray()
    sums = Gm.sum(axis=0)
    leaky = op.leaky_columns()
    assert np.max(np.abs(sums[~leaky])) < 1e-10
    assert np.all(sums[leaky] <= 1e-10)
    off = op.generator().toarray()
    np.fill_diagonal(off, 0.0)
    assert off.min() >= 0.0


def test_dimension_cap():
    with pytest.raises(ValueError, match="exceeds cap"):
        assemble(QueueConfig(1, 1, 1.0), GridConfig(10, 1.0, 100), 1.0, cap=500)


@pytest.mark.parametrize("dx", [0.05, 0.01])
def test_semi_discrete_generator_marginals_are_exact(dx):
    # Summing the upwind transport over age cells telescopes and midpoint psi
    # is an exact sum, so with exponential service the level marginals of the
    # method-of-lines system obey the CTMC exactly, at any dx.
    cfg = QueueConfig(2, 3, 1.0)
    lam, t = 0.8, 1.0
    g = GridConfig.from_step(20, 6.0, dx)
    G = assemble(cfg, g, lam).generator()
    v = expm_multiply(G * t, StateVector.initial(cfg, g).flat())
    idle, Q = marginals(StateVector.from_flat(v, cfg.k, g), g)
    ui, uq = uniformization(cfg, lam, 20, t, tol=1e-14)
    assert np.abs(idle - ui).max() < 1e-10
    assert np.abs(Q - uq).max() < 1e-10


def test_dump_triplets(tmp_path):
    op = assemble(QueueConfig(1, 1, 1.0), GridConfig(2, 1.0, 2), 1.0)
    path = tmp_path / "phi.txt"
    dump_triplets(op.Phi, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# shape 2 5"
    entries = [tuple(l.split()) for l in lines[1:]]
    assert ("0", "0", "1.0") in entries
