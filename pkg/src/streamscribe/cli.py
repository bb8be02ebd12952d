"""Command-line entry point: scenario generation, runs (with ablations),
allocation profiling, and hush-word training.

Results go to files; diagnostics go to stderr. Every command is
deterministic given its arguments.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import (
    InputPolicy,
    RunConfig,
    load_config,
    load_script,
    save_script,
    validate_script,
)
from .costmodel import hush_validity, load_hush, save_hush, train_hush
from .latency import Allocation, StageLatencyModel
from .live import live_run
from .metrics import build_report
from .pipeline import profile_allocations, simulate_pipeline, simulate_serial
from .scenarios import generate_script
from ._mix import unit_direction
from .core import normalize_word

ABLATIONS = ("hush", "prune", "pipeline", "none")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def cmd_gen(args: argparse.Namespace) -> int:
    script = generate_script(args.words, args.duration, args.seed, args.stability)
    save_script(script, args.out)
    print(f"wrote {args.out}: {len(script.words)} words, "
          f"{script.total_duration:.1f}s", file=sys.stderr)
    return 0


def _parse_ablations(raw: list[str] | None) -> set[str] | None:
    if raw is None:
        return None
    chosen: set[str] = set()
    for item in raw:
        for name in item.split(","):
            name = name.strip()
            if name not in ABLATIONS:
                raise ValueError(f"unknown ablation {name!r}; valid: {ABLATIONS}")
            chosen.add(name)
    if "none" in chosen and len(chosen) > 1:
        raise ValueError("'none' cannot be combined with other ablation toggles")
    return chosen


def _apply_ablations(config: RunConfig, chosen: set[str] | None) -> RunConfig:
    """No flag: run the config as-is. With flags: start from the baseline
    (padded input, full beam, serial) and enable the named features."""
    if chosen is None:
        return config
    from dataclasses import replace

    return replace(
        config,
        input_policy=(
            InputPolicy.HUSH_APPEND if "hush" in chosen else InputPolicy.PAD_TO_30S
        ),
        prune_enabled="prune" in chosen,
        pipeline_enabled="pipeline" in chosen,
    )


def _parse_allocation(raw: str) -> Allocation:
    path = Path(raw)
    if path.exists():
        for line in path.read_text().splitlines():
            if line.startswith("best,"):
                _, cpu, gpu = line.strip().split(",")
                return Allocation(int(cpu), int(gpu), int(cpu) + int(gpu) + 1)
        raise ValueError(f"no 'best' row in profiler output {raw!r}")
    cpu, gpu = raw.replace("x", ":").split(":")
    return Allocation(int(cpu), int(gpu), int(cpu) + int(gpu) + 1)


def _stage_ms(trace, *names: str) -> float:
    total = 0.0
    for name in names:
        interval = trace.stage_timings.get(name)
        if interval is not None:
            total += interval.end_ms - interval.start_ms
    return total


def _write_trace_csv(result, path: Path) -> None:
    lines = [
        "round_index,window_start_s,window_end_s,n_raw_tokens,n_confirmed_delta,"
        "fallback,avg_beam_size,n_steps,model_calls,enc_ms,prefill_ms,decode_ms,dtw_ms"
    ]
    for t in result.traces:
        sizes = t.beam_sizes_per_step
        avg_beam = sum(sizes) / len(sizes) if sizes else 0.0
        lines.append(
            f"{t.round_index},{t.window_start:.3f},{t.window_end:.3f},"
            f"{len(t.raw_tokens)},{len(t.confirmed_delta)},"
            f"{int(t.fallback_triggered)},{avg_beam:.3f},{len(sizes)},{t.model_calls},"
            f"{_stage_ms(t, 'encode'):.3f},{_stage_ms(t, 'prefill'):.3f},"
            f"{_stage_ms(t, 'decode', 'decode_gpu', 'decode_cpu', 'decode_takeover'):.3f},"
            f"{_stage_ms(t, 'dtw'):.3f}"
        )
    path.write_text("\n".join(lines) + "\n")


def cmd_run(args: argparse.Namespace) -> int:
    script = load_script(args.scenario)
    violations = validate_script(script)
    if violations:
        for v in violations:
            print(f"scenario: {v}", file=sys.stderr)
        return 1
    config = load_config(args.config) if args.config else RunConfig(seed=script.seed)
    try:
        config = _apply_ablations(config, _parse_ablations(args.ablation))
    except ValueError as exc:
        return _fail(str(exc))

    slm = StageLatencyModel()
    if args.allocation:
        try:
            slm = slm.with_allocation(_parse_allocation(args.allocation))
        except ValueError as exc:
            return _fail(str(exc))

    hush = load_hush(args.hush) if args.hush else None
    pipelined = config.pipeline_enabled
    simulate = simulate_pipeline if pipelined else simulate_serial
    schedule = simulate(script, slm, config, hush=hush)
    result = schedule.result

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "transcript.txt").write_text(" ".join(schedule.transcript) + "\n")
    reference = [normalize_word(w.text) for w in script.words]
    report = build_report(result, reference)
    (out_dir / "metrics.json").write_text(report.to_json())
    _write_trace_csv(result, out_dir / "trace.csv")

    if args.live:
        live = live_run(script, config, slm=slm, hush=hush)
        print(
            f"live run: {live.rounds} rounds, matches simulation: "
            f"{live.matches_simulation}",
            file=sys.stderr,
        )
        if not live.matches_simulation:
            return _fail("live transcript diverged from simulation")
    print(f"wrote {out_dir}/transcript.txt, metrics.json, trace.csv", file=sys.stderr)
    return 0


def cmd_profile(args: argparse.Namespace) -> int:
    script = load_script(args.scenario)
    config = load_config(args.config) if args.config else RunConfig(seed=script.seed)
    slm = StageLatencyModel()
    try:
        best, table = profile_allocations(script, slm, args.cores, config)
    except ValueError as exc:
        return _fail(str(exc))
    lines = ["cpu_cores,gpu_cores,per_word_latency_ms"]
    lines += [
        f"{a.cpu_exec_cores},{a.gpu_exec_cores},{latency:.3f}" for a, latency in table
    ]
    lines.append(f"best,{best.cpu_exec_cores},{best.gpu_exec_cores}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


def cmd_train_hush(args: argparse.Namespace) -> int:
    try:
        hush = train_hush(args.seed, dim=args.dim, iterations=args.iters)
    except ValueError as exc:
        return _fail(str(exc))
    save_hush(hush, args.out)
    validity = hush_validity(hush, unit_direction(args.seed, args.dim))
    print(f"validity: {validity:.6f}")
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamscribe",
        description="Streaming speech-processing simulator over a scripted backend",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="synthesize a scenario file")
    p_gen.add_argument("--words", type=_positive_int, required=True)
    p_gen.add_argument("--duration", type=float, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--stability", type=float, default=1.0)
    p_gen.set_defaults(func=cmd_gen)

    p_run = sub.add_parser("run", help="run the streaming loop on a scenario")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--config")
    p_run.add_argument(
        "--ablation",
        action="append",
        help="feature toggles (hush|prune|pipeline|none); repeatable or comma-separated",
    )
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--hush", help="hush word file (trained on demand otherwise)")
    p_run.add_argument("--allocation", help="'CPU:GPU' cores or profiler output file")
    p_run.add_argument("--live", action="store_true", help="verify with two real workers")
    p_run.set_defaults(func=cmd_run)

    p_prof = sub.add_parser("profile", help="sweep executor core allocations")
    p_prof.add_argument("--cores", type=int, required=True)
    p_prof.add_argument("--scenario", required=True)
    p_prof.add_argument("--config")
    p_prof.add_argument("--out")
    p_prof.set_defaults(func=cmd_profile)

    p_hush = sub.add_parser("train-hush", help="train a hush word")
    p_hush.add_argument("--dim", type=int, default=8000)
    p_hush.add_argument("--iters", type=_positive_int, default=500)
    p_hush.add_argument("--seed", type=int, default=0)
    p_hush.add_argument("--out", required=True)
    p_hush.set_defaults(func=cmd_train_hush)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    except KeyError as exc:
        return _fail(f"missing field {exc}")


if __name__ == "__main__":
    sys.exit(main())
