"""Acceptance gate: every criterion at its stated tolerance.

Run ``pytest tests/test_acceptance.py -s`` to see the pass/fail lines as they
are produced; they are also collected in the terminal summary.
"""

import json
import math

import numpy as np
import pytest

from resparsify.cli import main
from resparsify.experiments import run_game_trials, run_sparsify
from resparsify.game import GameConfig, new_game, play_move
from resparsify.io import write_matrix
from resparsify.linalg import gram, leverage_scores
from resparsify.sparsifier import SparsifierConfig, StreamingSparsifier
from resparsify.streams import chunked, rescaled_isotropic_gaussian

D, EPS, N_ROWS, SEEDS = 8, 0.5, 400_000, 20
GAME_D, GAME_N, GAME_EPS, TRIALS = 8, 4096, 0.45, 200
GAME_STRATEGIES = ("sequential", "uniform_random", "greedy_spectral")


def stream(seed):
    return rescaled_isotropic_gaussian(N_ROWS, D, np.random.default_rng(seed))


@pytest.fixture(scope="module")
def end_to_end_runs():
    runs = []
    for seed in range(SEEDS):
        cfg = SparsifierConfig(epsilon=EPS, dim=D, rng_seed=seed, audit_stale_leverage=True)
        sizes = []
        sp, _, rep = run_sparsify(chunked(stream(seed), 8192), cfg,
                                  round_hook=lambda s: sizes.append(len(s)))
        rep["hook_sizes"] = sizes
        rep["config_obj"] = cfg
        runs.append(rep)
    return runs


@pytest.fixture(scope="module")
def game_runs():
    out = {}
    for strategy in GAME_STRATEGIES:
        for augmented in (False, True):
            out[strategy, augmented] = run_game_trials(
                dim=GAME_D, n_rows=GAME_N, epsilon=GAME_EPS, strategy=strategy, trials=TRIALS,
                seed=1000, augmented=augmented)
    return out


def test_c1_end_to_end(gate, end_to_end_runs):
    passed = sum(r["spectral"] is not None and r["spectral"]["passed"] for r in end_to_end_runs)
    slowest = max(r["wall_clock_seconds"] for r in end_to_end_runs)
    lo = min(r["spectral"]["lambda_min"] for r in end_to_end_runs if r["spectral"])
    hi = max(r["spectral"]["lambda_max"] for r in end_to_end_runs if r["spectral"])
    ok = passed >= 19 and slowest < 60
    gate.record("1", ok, f"{passed}/{SEEDS} runs certified, eigenvalues in [{lo:.4f}, {hi:.4f}], "
                         f"slowest run {slowest:.1f}s")
    assert ok


def test_c2_space_bound(gate, end_to_end_runs):
    cfg = end_to_end_runs[0]["config_obj"]
    high, low = math.ceil(20 * D * cfg.c), math.ceil(10 * D * cfg.c)
    assert cfg.high_capacity == high and cfg.low_capacity == low
    peak = max(r["peak_buffer"] for r in end_to_end_runs)
    post = max(e["size_after"] for r in end_to_end_runs for e in r["round_log"])
    # the hook sees the buffer at its largest, just before each round
    hooked = max(max(r["hook_sizes"]) for r in end_to_end_runs)
    ok = peak <= high + 1 and hooked <= high + 1 and post <= low
    gate.record("2", ok, f"peak {peak} <= {high + 1}, post-round max {post} <= {low}")
    assert ok


@pytest.mark.parametrize("strategy", GAME_STRATEGIES)
def test_c3_win_rate(gate, game_runs, strategy):
    rep = game_runs[strategy, False]
    ok = rep["win_rate"] <= 0.05
    gate.record(f"3/{strategy}", ok, f"win rate {rep['win_rate']:.3f} over {rep['trials']} trials "
                                     f"(c={rep['config']['c']:.1f}, mean moves {rep['moves']['mean']:.1f})")
    assert ok


@pytest.mark.parametrize("strategy", GAME_STRATEGIES)
def test_c4_variation(gate, game_runs, strategy):
    rep = game_runs[strategy, True]
    q95 = rep["variation_norm_times_c"]["q95"]
    ok = q95 <= 4
    gate.record(f"4/{strategy}", ok, f"q95 of c*||V|| = {q95:.4f} <= 4")
    assert ok


@pytest.mark.parametrize("strategy", GAME_STRATEGIES)
def test_c5_quadratic_variation(gate, game_runs, strategy):
    rep = game_runs[strategy, True]
    q95 = rep["quadratic_variation_norm_times_c"]["q95"]
    worst = max(t["quadratic_variation_norm"] - 2 * t["variation_norm"] for t in rep["per_trial"])
    ok = q95 <= 8 and worst <= 1e-9
    gate.record(f"5/{strategy}", ok,
                f"q95 of c*||W|| = {q95:.4f} <= 8, max(||W|| - 2||V||) = {worst:.2e}")
    assert ok


def _oracle_leverage(A, w):
    M = sum(wi * np.outer(a, a) for a, wi in zip(A, w)) if len(A) else np.zeros((A.shape[1],) * 2)
    Mp = np.linalg.pinv(M, rcond=1e-10, hermitian=True)
    return np.array([wi * a @ Mp @ a for a, wi in zip(A, w)]), np.linalg.matrix_rank(M, tol=1e-8)


def test_c6_leverage_oracle(gate):
    rng = np.random.default_rng(6)
    worst_l = worst_sum = 0.0
    deficient = 0
    for _ in range(500):
        d = int(rng.integers(1, 7))
        n = int(rng.integers(1, 41))
        r = int(rng.integers(1, d + 1)) if rng.random() < 0.4 else d
        basis = np.linalg.qr(rng.standard_normal((d, d)))[0][:, :r]
        A = rng.standard_normal((n, r)) @ basis.T
        w = rng.uniform(0.1, 10.0, n)
        w[rng.random(n) < 0.1] = 0.0
        fast = leverage_scores(A, w)
        slow, rank = _oracle_leverage(A, w)
        deficient += rank < d
        worst_l = max(worst_l, float(np.max(np.abs(fast - slow))))
        worst_sum = max(worst_sum, abs(float(fast.sum()) - rank))
    ok = worst_l <= 1e-8 and worst_sum <= 1e-8
    gate.record("6", ok, f"500 instances ({deficient} rank-deficient): max |l - oracle| = "
                         f"{worst_l:.1e}, max |sum l - rank| = {worst_sum:.1e}")
    assert ok


def test_c7_mean_preservation(gate):
    # single move of the game
    m = 32
    rows = np.repeat(np.eye(2), m, axis=0) / math.sqrt(m) @ np.array([[0.8, 0.6], [-0.6, 0.8]])
    n_rep = 10_000
    grams = np.empty((n_rep, 2, 2))
    for seed in range(n_rep):
        state = new_game(rows, GameConfig(0.3, c=4.0, rng_seed=seed))
        pre = state.gram.copy()
        play_move(state, 5)
        grams[seed] = state.gram
    z_game = np.max(np.abs(grams.mean(0) - pre) / (grams.std(0, ddof=1) / math.sqrt(n_rep)))

    # whole pipeline with scaled-down constants
    d = 4
    base = SparsifierConfig(epsilon=0.5, dim=d, scale=0.005)
    A = np.random.default_rng(7).standard_normal((2 * base.high_capacity + 50, d))
    target = gram(A).matrix
    acc = np.empty((n_rep, d, d))
    failures = rounds = 0
    for seed in range(n_rep):
        sp = StreamingSparsifier(SparsifierConfig(epsilon=0.5, dim=d, scale=0.005, rng_seed=seed))
        sp.ingest_many(A)
        failures += sp.failed
        rounds += len(sp.rounds)
        acc[seed] = gram(sp.finalize()).matrix if not sp.failed else np.nan
    se = acc.std(0, ddof=1) / math.sqrt(n_rep)
    z_pipe = np.max(np.abs(acc.mean(0) - target) / se)
    ok = z_game <= 3 and z_pipe <= 3 and failures == 0
    gate.record("7", ok, f"game single move max |z| = {z_game:.2f}, pipeline "
                         f"({rounds / n_rep:.1f} rounds/run, {failures} failures) max |z| = "
                         f"{z_pipe:.2f}, both <= 3")
    assert ok


def test_c8_stale_leverage(gate, end_to_end_runs):
    maxima = [max(r["stale_ratios"]) for r in end_to_end_runs]
    within = sum(x <= 1 + EPS for x in maxima)
    ok = within >= 19
    gate.record("8", ok, f"{within}/{SEEDS} runs with max ratio <= {1 + EPS} "
                         f"(largest {max(maxima):.4f})")
    assert ok


def test_c9_determinism(gate, tmp_path):
    in_path = tmp_path / "stream.bin"
    write_matrix(str(in_path), stream(0), "binary-f64-rows")
    outputs, reports = [], []
    for k in range(2):
        out, rep = tmp_path / f"out{k}.bin", tmp_path / f"rep{k}.json"
        code = main(["sparsify", "--input", str(in_path), "--epsilon", str(EPS), "--seed", "0",
                     "--audit-leverage", "--output", str(out), "--report", str(rep)])
        assert code == 0
        outputs.append(out.read_bytes())
        doc = json.loads(rep.read_text())
        doc.pop("wall_clock_seconds")
        reports.append(doc)
    ok = outputs[0] == outputs[1] and reports[0] == reports[1]
    gate.record("9", ok, f"outputs bitwise identical ({len(outputs[0])} bytes), reports equal "
                         "apart from wall-clock time")
    assert ok
