"""Acceptance criteria AC-1..AC-8, each printing one PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import json
import math
import random
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import (bf_backtrack, bf_candidates, bf_find_paths, bf_top_k_mass, random_graph_doc,  # noqa: E402
                     traj)
from toolinertia.bench import BenchConfig, benchmark, run_cell  # noqa: E402
from toolinertia.chainworld import ChainWorldConfig  # noqa: E402
from toolinertia.cli import main as cli_main  # noqa: E402
from toolinertia.entropy import (conditional_entropy, entropy_profile, fit_markov, g2_test,  # noqa: E402
                                 top_k_mass)
from toolinertia.graph import backtrack_param_sources, import_graph  # noqa: E402
from toolinertia.harness import validate_trace  # noqa: E402
from toolinertia.predictor import (PredictorConfig, candidate_successors, cips,  # noqa: E402
                                   inertia_confidence_factor, inertia_confidence_score)


_terminal = None


@pytest.fixture(autouse=True)
def _reporter(request):
    global _terminal
    _terminal = request.config.pluginmanager.get_plugin("terminalreporter")


def report(name, ok, detail=""):
    line = f"{name} {'PASS' if ok else 'FAIL'}" + (f"  {detail}" if detail else "")
    if _terminal is not None:
        _terminal.ensure_newline()
        _terminal.write_line(line)
    else:
        print(line)
    assert ok, line


def test_ac1_formula_exactness():
    start = time.perf_counter()
    problems = []
    if inertia_confidence_factor(0, 1.1) != 0.0:
        problems.append("ICF(0) != 0")
    if abs(inertia_confidence_factor(1, 1.1) - (1 - 1 / 1.1)) >= 1e-12:
        problems.append("ICF(1)")
    if abs(inertia_confidence_factor(10, 1.1) - (1 - 1.1 ** -10)) >= 1e-12:
        problems.append("ICF(10)")
    rng = random.Random("ac1")
    for _ in range(1000):
        ws = [rng.randint(1, 40) for _ in range(rng.randint(1, 8))]
        W = sum(ws)
        icf = inertia_confidence_factor(W)
        if abs(sum(inertia_confidence_score(w, W, icf) for w in ws) - icf) >= 1e-12:
            problems.append(f"sum ICS != ICF for {ws}")
            break
        f, c = rng.random(), rng.random()
        if cips(f, c, 0.0) != f or cips(f, c, 1.0) != c:
            problems.append(f"CIPS endpoints for {f}, {c}")
            break
    elapsed = time.perf_counter() - start
    if elapsed >= 1.0:
        problems.append(f"took {elapsed:.2f}s")
    report("AC-1", not problems, "; ".join(problems))


def test_ac2_entropy():
    start = time.perf_counter()
    problems = []
    det = conditional_entropy(fit_markov([list("ABCDE" * 20)], 1)).entropy_bits
    if det != 0.0:
        problems.append(f"deterministic corpus gives {det}")
    uni = conditional_entropy(fit_markov([list("ABCDEFGH")], 0)).entropy_bits
    if abs(uni - 3.0) >= 1e-12:
        problems.append(f"uniform over 8 gives {uni}")
    p, q = 0.887, 0.113
    two = conditional_entropy(fit_markov([["A"] * 887 + ["B"] * 113], 0)).entropy_bits
    closed = -(p * math.log2(p) + q * math.log2(q))
    if abs(two - closed) >= 1e-9:
        problems.append(f"two-point {two} vs {closed}")
    for seed in range(50):
        rng = random.Random(f"ac2-{seed}")
        tools = "ABCDEF"[: rng.randint(2, 6)]
        seqs = [[rng.choice(tools) for _ in range(rng.randint(4, 40))] for _ in range(rng.randint(1, 8))]
        hs = [r.entropy_bits for r in entropy_profile(seqs, [0, 1, 2, 3])]
        if any(b > a + 1e-12 for a, b in zip(hs, hs[1:])):
            problems.append(f"seed {seed} not monotone: {hs}")
    elapsed = time.perf_counter() - start
    if elapsed >= 5.0:
        problems.append(f"took {elapsed:.2f}s")
    report("AC-2", not problems, "; ".join(problems))


def _g2_p(seq):
    return g2_test(fit_markov([seq], 0, 1), fit_markov([seq], 1, 1))


def test_ac3_g2_calibration():
    start = time.perf_counter()
    tools = [f"t{i}" for i in range(6)]
    iid_pass = 0
    for seed in range(100):
        rng = random.Random(f"ac3-iid-{seed}")
        iid_pass += _g2_p([rng.choice(tools) for _ in range(2000)]).p_value > 0.05
    chain_pass = 0
    for seed in range(100):
        rng = random.Random(f"ac3-chain-{seed}")
        order = tools[:]
        rng.shuffle(order)
        nxt = {a: b for a, b in zip(order, order[1:] + order[:1])}
        seq = [rng.choice(tools)]
        while len(seq) < 2000:
            seq.append(nxt[seq[-1]])
        chain_pass += _g2_p(seq).p_value < 0.001
    # events B A B A B: order-1 cells A->B (3), B->A (2) against marginals 3/5, 2/5
    hand = 2 * (3 * math.log(3 / (3 * 3 / 5)) + 2 * math.log(2 / (2 * 2 / 5)))
    tiny = _g2_p(list("ABABAB")).statistic
    elapsed = time.perf_counter() - start
    ok = iid_pass >= 90 and chain_pass == 100 and abs(tiny - hand) < 1e-9 and elapsed < 60
    report("AC-3", ok, f"iid p>0.05 in {iid_pass}/100, chain p<0.001 in {chain_pass}/100, "
                       f"tiny |diff|={abs(tiny - hand):.1e}, {elapsed:.1f}s")


def _random_trajectory(rng):
    pool = ["x", "y", " x", "z", "", 0, 1, True, False, ("x", "y"), ("z",), ()]
    names = ["p", "q", "r"]

    def pmap():
        return {n: rng.choice(pool) for n in rng.sample(names, rng.randint(0, 3))}

    tools = [f"t{i}" for i in range(rng.randint(2, 12))]
    return traj([(rng.choice(tools), pmap(), pmap()) for _ in range(rng.randint(1, 8))])


def test_ac4_oracle_equivalence():
    start = time.perf_counter()
    rng = random.Random("ac4")
    mismatches = {"find_paths_containing": 0, "candidate_successors": 0, "backtrack_param_sources": 0,
                  "top_k_mass": 0}
    for _ in range(200):
        g = import_graph(json.dumps(random_graph_doc(rng, 12, 50)))
        names = sorted(g.nodes)
        q = tuple(rng.choice(names) for _ in range(rng.randint(1, 3)))
        if g.find_paths_containing(q) != bf_find_paths({p.id: p.tools for p in g.paths}, q):
            mismatches["find_paths_containing"] += 1
        w = tuple(rng.choice(names) for _ in range(rng.randint(1, 2)))
        cands, W = candidate_successors(g, w)
        if ({c.tool: c.weight for c in cands}, W) != bf_candidates([(p.tools, p.frequency) for p in g.paths], w):
            mismatches["candidate_successors"] += 1
    for _ in range(200):
        t = _random_trajectory(rng)
        step = rng.randrange(len(t.invocations))
        if [tuple(s) for s in backtrack_param_sources(t, step)] != bf_backtrack(t, step):
            mismatches["backtrack_param_sources"] += 1
    for _ in range(200):
        tools = [f"t{i}" for i in range(rng.randint(2, 12))]
        seqs = [[rng.choice(tools) for _ in range(rng.randint(2, 15))] for _ in range(rng.randint(1, 50))]
        k = rng.randint(1, 5)
        if abs(top_k_mass(fit_markov(seqs, 1), k) - bf_top_k_mass(seqs, k)) > 1e-12:
            mismatches["top_k_mass"] += 1
    elapsed = time.perf_counter() - start
    ok = not any(mismatches.values()) and elapsed < 30
    report("AC-4", ok, f"mismatches {mismatches}, {elapsed:.1f}s")


def test_ac5_gate_safety():
    start = time.perf_counter()
    predictor = PredictorConfig(theta_inertial=0.1, inertial_cap=0.30)
    problems, inertial, episodes = [], 0, 0
    for seed in range(50):
        # a cold graph never fires, so each seed runs ten episodes on its own shared graph
        cfg = BenchConfig(predictor=predictor, episodes=10, seeds=(seed,), variants=("autotool",))
        for m, _ in run_cell("autotool", seed, cfg):
            episodes += 1
            inertial += m.inertial_calls
            problems += [f"seed {seed} ep {m.episode}: {p}" for p in validate_trace(m.trace, 0.30, True)]
    elapsed = time.perf_counter() - start
    ok = not problems and inertial > 0 and elapsed < 60
    report("AC-5", ok, f"{episodes} episodes, {inertial} inertial calls, {len(problems)} violations"
                       + (f" first: {problems[0]}" if problems else "") + f", {elapsed:.1f}s")


@pytest.fixture(scope="module")
def main_bench():
    cfg = BenchConfig(env=ChainWorldConfig(n_tools=12, rho=0.887), noise=0.1, episodes=40,
                      seeds=tuple(range(10)), variants=("baseline", "autotool", "ngram"), ngram_order=3)
    start = time.perf_counter()
    return benchmark(cfg), time.perf_counter() - start


def test_ac6_directional_speedup(main_bench):
    r, elapsed = main_bench
    base, auto, ngram = r.means["baseline"], r.means["autotool"], r.means["ngram"]
    reduction = 1 - auto["LLMC"] / base["LLMC"]
    drop = base["PR"] - auto["PR"]
    ngram_red = 1 - ngram["LLMC"] / base["LLMC"]
    ok = reduction >= 0.15 and drop <= 0.02 and elapsed < 300
    report("AC-6", ok, f"LLMC {base['LLMC']:.2f} -> {auto['LLMC']:.2f} ({reduction:.1%} fewer), "
                       f"PR drop {drop:.3f}; ngram(3) LLMC {ngram['LLMC']:.2f} ({ngram_red:.1%} fewer), "
                       f"PR {ngram['PR']:.3f}; {elapsed:.1f}s")


def test_ac7_learning_direction(main_bench):
    r, _ = main_bench
    rising = []
    for seed, calls in r.per_seed_inertial["autotool"].items():
        early, late = sum(calls[:20]) / 20, sum(calls[20:40]) / 20
        rising.append(late > early)
    report("AC-7", sum(rising) >= 9, f"late > early for {sum(rising)}/{len(rising)} seeds")


def test_ac8_determinism(tmp_path):
    argv = ["bench", "--episodes", "10", "--n-seeds", "3", "--variants", "baseline,autotool,ngram+recovery"]
    codes = [cli_main(argv + ["--out", str(tmp_path / d)]) for d in ("a", "b")]
    differ = [n for n in ("bench.json", "episodes.jsonl", "table.txt", "manifest.json")
              if (tmp_path / "a" / n).read_bytes() != (tmp_path / "b" / n).read_bytes()]
    cfg = BenchConfig(episodes=8, seeds=(3, 4))
    x, y = benchmark(cfg), benchmark(cfg)
    same_api = x.to_json() == y.to_json() and x.episodes_jsonl() == y.episodes_jsonl()
    ok = codes == [0, 0] and not differ and same_api
    report("AC-8", ok, f"differing files: {differ or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
