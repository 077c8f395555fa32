"""Black-box fuzzing harness.

Runs target programs over generated or mutated files, classifies outcomes
(exit 0 = valid, nonzero = invalid, signal = crash, wall clock = timeout),
persists findings alongside replayable decision seeds, and implements the
QA commands (round-trip, coverage) exposed by the CLI.
"""

from __future__ import annotations

import json
import multiprocessing
import os
import random
import shlex
import subprocess
import sys
import tempfile
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .engine import generate_from_seed, generate_random, parse
from .errors import GenerationFailed, NoApplicableMutation, ParseRejected, TrailingBytes
from .formats import VERIFIERS, load_template, resolve_template, verify
from .mutation import index_corpus, random_smart_mutation
from .runtime import DEFAULT_BUDGET

OUTCOME_KINDS = ("valid", "invalid", "crash", "timeout", "gen_failed")

# Successive files draw from independent rngs derived from one master seed,
# so runs are reproducible regardless of how work is split across jobs.
RNG_STRIDE = 1_000_003


@dataclass
class Outcome:
    """One target execution, classified."""

    kind: str
    exit_code: int | None = None
    signal: int | None = None
    duration: float = 0.0

    def __post_init__(self):
        # crash if and only if the target died to a signal
        assert (self.kind == "crash") == (self.signal is not None)

    def to_json(self) -> dict:
        return {"kind": self.kind, "exit_code": self.exit_code,
                "signal": self.signal, "duration": round(self.duration, 6)}


def run_target(target: str, data: bytes, timeout_ms: int) -> Outcome:
    """Deliver one input to the target command and classify the result.

    The input goes to stdin unless the command contains a `{}` token, which
    is substituted with the path of a temporary file holding the input.
    Spawn failures (missing executable) raise OSError to the caller.
    """
    argv = shlex.split(target)
    if not argv:
        raise ValueError("empty target command")
    uses_path = any("{}" in word for word in argv)
    tmp_path = None
    started = time.perf_counter()
    try:
        if uses_path:
            fd, tmp_path = tempfile.mkstemp(prefix="btfuzz_in_")
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            argv = [word.replace("{}", tmp_path) for word in argv]
            stdin_data = None
        else:
            stdin_data = data
        try:
            proc = subprocess.run(argv, input=stdin_data,
                                  stdout=subprocess.DEVNULL,
                                  stderr=subprocess.DEVNULL,
                                  timeout=timeout_ms / 1000.0)
        except subprocess.TimeoutExpired:
            return Outcome("timeout", duration=time.perf_counter() - started)
        duration = time.perf_counter() - started
        code = proc.returncode
        if code < 0:
            return Outcome("crash", signal=-code, duration=duration)
        kind = "valid" if code == 0 else "invalid"
        return Outcome(kind, exit_code=code, duration=duration)
    finally:
        if tmp_path is not None:
            try:
                os.unlink(tmp_path)
            except OSError:
                pass


def _stats_line(counts: Counter, iters: int, elapsed: float) -> str:
    valid_pct = 100.0 * counts["valid"] / iters if iters else 0.0
    rate = iters / elapsed if elapsed > 0 else 0.0
    return json.dumps({"iters": iters, "valid%": round(valid_pct, 1),
                       "crashes": counts["crash"], "execs/s": round(rate, 1)})


def _fuzz_worker(cfg: dict) -> dict:
    """One fuzzing loop; top-level so multiprocessing can pickle it."""
    unit = load_template(cfg["template"])
    evil, budget = cfg["evil"], cfg["budget"]
    out_dir = Path(cfg["out"])
    pool = None
    bases = []
    if cfg["corpus"] is not None:
        pool = index_corpus(unit, cfg["corpus"], evil=evil, budget=budget)
        bases = sorted(pool.seeds)
        if not bases:
            raise NoApplicableMutation("no corpus file parsed")
    counts: Counter = Counter()
    findings = []
    started = time.perf_counter()
    for i in range(cfg["count"]):
        index = cfg["start"] + i
        rng = random.Random(cfg["rng_seed"] * RNG_STRIDE + index)
        seed_bytes = None
        try:
            if pool is None:
                result = generate_random(unit, rng, evil=evil, budget=budget)
                data, seed_bytes = result.file, result.seed
            else:
                data, _ = random_smart_mutation(unit, pool, rng.choice(bases), rng)
        except (GenerationFailed, NoApplicableMutation):
            counts["gen_failed"] += 1
            continue
        outcome = run_target(cfg["target"], data, cfg["timeout_ms"])
        counts[outcome.kind] += 1
        if outcome.kind in ("crash", "timeout"):
            if seed_bytes is None:
                # mutated inputs: recover the canonical seed for replay
                seed_bytes = parse(unit, data, evil=evil).seed
            name = f"{outcome.kind}_{cfg['worker']:02d}_{index:06d}"
            (out_dir / f"{name}.bin").write_bytes(data)
            (out_dir / f"{name}.seed").write_bytes(seed_bytes)
            findings.append(name)
        done = i + 1
        if cfg["progress_every"] and done % cfg["progress_every"] == 0:
            print(_stats_line(counts, done, time.perf_counter() - started),
                  flush=True)
    return {"counts": dict(counts), "findings": findings,
            "duration": time.perf_counter() - started}


def _load_corpus_dir(corpus_dir: str) -> dict[str, bytes]:
    """Corpus files keyed by filename.  Directories produced by `generate`
    hold .bin/.seed pairs; when any .bin is present only those are taken,
    otherwise every regular file counts."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {corpus_dir}")
    paths = sorted(p for p in root.iterdir() if p.is_file())
    bins = [p for p in paths if p.suffix == ".bin"]
    if bins:
        paths = bins
    return {p.name: p.read_bytes() for p in paths}


def _master_seed(args) -> int:
    if args.rng_seed is not None:
        return args.rng_seed
    seed = random.randrange(2**32)
    print(f"rng seed not given; using {seed}", file=sys.stderr)
    return seed


# ---------------------------------------------------------------------------
# subcommand implementations; each returns the process exit code


def cmd_generate(args) -> int:
    unit = load_template(args.template)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    evil = not args.no_evil

    if args.seed is not None:
        if args.rng_seed is not None:
            print("--seed and --rng-seed are mutually exclusive seed sources",
                  file=sys.stderr)
            return 1
        if args.count != 1:
            print("--seed replays exactly one file; --count must be 1",
                  file=sys.stderr)
            return 1
        seed = Path(args.seed).read_bytes()
        try:
            result = generate_from_seed(unit, seed, evil=evil, budget=args.max_size)
        except GenerationFailed as exc:
            print(f"generation failed: {exc}", file=sys.stderr)
            return 1
        name = Path(args.seed).stem
        bin_path = out_dir / f"{name}.bin"
        bin_path.write_bytes(result.file)
        (out_dir / f"{name}.seed").write_bytes(result.seed)
        print(f"replayed {len(seed)} seed byte(s) -> {bin_path} "
              f"({len(result.file)} bytes)")
        return 0

    master = _master_seed(args)
    ok = failed = 0
    started = time.perf_counter()
    for i in range(args.count):
        rng = random.Random(master * RNG_STRIDE + i)
        try:
            result = generate_random(unit, rng, evil=evil, budget=args.max_size)
        except GenerationFailed:
            failed += 1
            continue
        name = f"gen_{i:06d}"
        (out_dir / f"{name}.bin").write_bytes(result.file)
        (out_dir / f"{name}.seed").write_bytes(result.seed)
        ok += 1
    elapsed = time.perf_counter() - started
    rate = args.count / elapsed if elapsed > 0 else 0.0
    print(f"generated {ok}/{args.count} files ({failed} failed) "
          f"in {elapsed:.2f}s, {rate:.0f} files/s -> {out_dir}")
    return 0


def cmd_parse(args) -> int:
    unit = load_template(args.template)
    in_path = Path(args.file)
    data = in_path.read_bytes()
    try:
        outcome = parse(unit, data, evil=not args.no_evil)
    except TrailingBytes as exc:
        print(f"trailing bytes: {exc}", file=sys.stderr)
        return 4
    except ParseRejected as exc:
        print(f"parse rejected: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else in_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    tree_path = out_dir / f"{in_path.name}.tree.json"
    seed_path = out_dir / f"{in_path.name}.seed"
    tree_path.write_text(json.dumps(outcome.tree.to_json(), indent=2) + "\n")
    seed_path.write_bytes(outcome.seed)
    nodes = sum(1 for _ in outcome.tree.walk())
    print(f"accepted: {nodes} nodes, {len(outcome.seed)} seed byte(s) "
          f"-> {tree_path}, {seed_path}")
    return 0


def cmd_replay(args) -> int:
    unit = load_template(args.template)
    seed = Path(args.seed).read_bytes()
    try:
        result = generate_from_seed(unit, seed, evil=not args.no_evil,
                                    budget=args.max_size)
    except GenerationFailed as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return 1
    if args.out:
        Path(args.out).write_bytes(result.file)
        print(f"wrote {len(result.file)} bytes -> {args.out}")
    if args.target:
        try:
            outcome = run_target(args.target, result.file, args.timeout_ms)
        except OSError as exc:
            print(f"cannot run target: {exc}", file=sys.stderr)
            return 1
        print(json.dumps(outcome.to_json()))
    elif not args.out:
        sys.stdout.buffer.write(result.file)
        sys.stdout.buffer.flush()
    return 0


def cmd_mutate(args) -> int:
    unit = load_template(args.template)
    evil = not args.no_evil
    try:
        corpus = _load_corpus_dir(args.corpus)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if not corpus:
        print(f"corpus directory is empty: {args.corpus}", file=sys.stderr)
        return 1
    pool = index_corpus(unit, corpus, evil=evil, budget=args.max_size)
    for cid, why in pool.failures:
        print(f"skipping {cid}: {why}", file=sys.stderr)
    if not pool.seeds:
        print("no corpus file parsed; nothing to mutate", file=sys.stderr)
        return 1
    bases = sorted(pool.seeds)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    master = _master_seed(args)
    ok = 0
    with open(out_dir / "mutations.jsonl", "w") as log:
        for i in range(args.count):
            rng = random.Random(master * RNG_STRIDE + i)
            base = rng.choice(bases)
            try:
                data, desc = random_smart_mutation(unit, pool, base, rng)
            except NoApplicableMutation as exc:
                log.write(json.dumps({"op": None, "base": base, "ok": False,
                                      "error": str(exc)}) + "\n")
                continue
            (out_dir / f"mut_{i:06d}.bin").write_bytes(data)
            log.write(json.dumps(desc) + "\n")
            ok += 1
    print(f"wrote {ok}/{args.count} mutated files -> {out_dir}")
    return 0


def cmd_fuzz(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = None
    if args.corpus:
        try:
            corpus = _load_corpus_dir(args.corpus)
        except FileNotFoundError as exc:
            print(str(exc), file=sys.stderr)
            return 1
    master = _master_seed(args)
    base_cfg = {
        "template": args.template,
        "target": args.target,
        "timeout_ms": args.timeout_ms,
        "evil": not args.no_evil,
        "budget": args.max_size,
        "out": str(out_dir),
        "corpus": corpus,
        "rng_seed": master,
    }
    jobs = max(1, args.jobs)
    per = [args.count // jobs + (1 if w < args.count % jobs else 0)
           for w in range(jobs)]
    cfgs = []
    start = 0
    for w, n in enumerate(per):
        if n == 0:
            continue
        cfg = dict(base_cfg, worker=w, start=start, count=n,
                   progress_every=(max(1, args.count // 10) if jobs == 1 else 0))
        cfgs.append(cfg)
        start += n
    started = time.perf_counter()
    try:
        if len(cfgs) == 1:
            results = [_fuzz_worker(cfgs[0])]
        else:
            with multiprocessing.Pool(len(cfgs)) as mp:
                results = mp.map(_fuzz_worker, cfgs)
    except OSError as exc:
        print(f"cannot run target: {exc}", file=sys.stderr)
        return 1
    except NoApplicableMutation as exc:
        print(str(exc), file=sys.stderr)
        return 1
    wall = time.perf_counter() - started
    counts: Counter = Counter()
    findings: list[str] = []
    for res in results:
        counts.update(res["counts"])
        findings.extend(res["findings"])
    iters = sum(counts[k] for k in OUTCOME_KINDS)
    print(_stats_line(counts, iters, wall))
    stats = {k: counts[k] for k in OUTCOME_KINDS}
    stats.update(iterations=iters, execs_per_s=round(iters / wall, 1) if wall else 0.0,
                 duration_s=round(wall, 3), findings=findings)
    (out_dir / "stats.json").write_text(json.dumps(stats, indent=2) + "\n")
    print(f"{counts['crash']} crash(es), {counts['timeout']} timeout(s) "
          f"-> {out_dir}")
    return 0


def cmd_roundtrip(args) -> int:
    unit = load_template(args.template)
    evil = not args.no_evil
    failures = 0

    if args.corpus:
        try:
            corpus = _load_corpus_dir(args.corpus)
        except FileNotFoundError as exc:
            print(str(exc), file=sys.stderr)
            return 1
        for name, data in corpus.items():
            try:
                outcome = parse(unit, data, evil=evil)
            except ParseRejected as exc:
                print(f"{name}: parse-rejected ({exc})")
                continue
            regen = generate_from_seed(unit, outcome.seed, evil=evil,
                                       budget=max(args.max_size, len(data)))
            if regen.file == data:
                print(f"{name}: pass")
            else:
                print(f"{name}: FAIL (regenerated file differs)")
                failures += 1

    master = _master_seed(args)
    gen_failed = checked = 0
    for i in range(args.count):
        rng = random.Random(master * RNG_STRIDE + i)
        try:
            result = generate_random(unit, rng, evil=evil, budget=args.max_size)
        except GenerationFailed:
            gen_failed += 1
            continue
        checked += 1
        try:
            outcome = parse(unit, result.file, evil=evil)
            regen = generate_from_seed(unit, outcome.seed, evil=evil,
                                       budget=args.max_size)
        except (ParseRejected, GenerationFailed) as exc:
            print(f"seed {i}: FAIL ({exc})")
            failures += 1
            continue
        if regen.file != result.file:
            print(f"seed {i}: FAIL (regenerated file differs)")
            failures += 1
    if args.count:
        print(f"random seeds: {checked - failures}/{checked} round-tripped "
              f"({gen_failed} generation failures skipped)")
    if failures:
        print(f"{failures} round-trip failure(s)", file=sys.stderr)
        return 3
    return 0


def cmd_coverage(args) -> int:
    unit = load_template(args.template)
    evil = not args.no_evil
    master = _master_seed(args)
    hits: Counter = Counter()
    gen_failed = 0
    for i in range(args.count):
        rng = random.Random(master * RNG_STRIDE + i)
        try:
            result = generate_random(unit, rng, evil=evil, budget=args.max_size)
        except GenerationFailed:
            gen_failed += 1
            continue
        hits.update(result.covered)
    total = len(unit.declarations)
    covered = sum(1 for d in unit.declarations if hits[d.decl_id])
    pct = 100.0 * covered / total if total else 0.0
    print(f"declaration coverage: {covered}/{total} ({pct:.1f}%) "
          f"over {args.count} generations ({gen_failed} failed)")
    missed = [d for d in unit.declarations if not hits[d.decl_id]]
    for d in missed:
        print(f"  never hit: {d.name} ({d.type_name})")
    if args.out:
        report = {
            "covered": covered, "total": total, "percent": round(pct, 2),
            "generations": args.count,
            "hits": {str(d.decl_id): {"name": d.name, "type": d.type_name,
                                      "hits": hits[d.decl_id]}
                     for d in unit.declarations},
        }
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
        print(f"report -> {args.out}")
    return 0


def cmd_verify(args) -> int:
    name, _ = resolve_template(args.template)
    if name not in VERIFIERS:
        print(f"no oracle for template {name!r} "
              f"(have: {', '.join(sorted(VERIFIERS))})", file=sys.stderr)
        return 1
    bad = 0
    for path in args.files:
        data = Path(path).read_bytes()
        valid, violations = verify(name, data)
        if valid:
            print(f"{path}: valid")
        else:
            bad += 1
            print(f"{path}: INVALID")
            for v in violations:
                print(f"  {v}")
    return 2 if bad else 0
