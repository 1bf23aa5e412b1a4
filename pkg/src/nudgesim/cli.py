"""Command line entry points.

    nudgesim run --scenario F [--seed S] [--headless] [--log OUT] [--bind H:P]
    nudgesim replay --log F [--speed K] [--bind H:P]
    nudgesim recall-exp --n 0,5,10,15 --trials 20 --client mock|live ...
    nudgesim plot --log F --out DIR

Exit codes: 0 success, 2 invalid invocation, 3 scenario error, 4 runtime
failure.  Headless runs never open a network listener.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from .events import EventLog
from .llm_clients import LiveClient, LiveClientConfig, MockClient, RecallPolicy
from .orchestrator import RecallTrialState, recall_experiment
from .pose_math import Pose
from .scenario import ScenarioInvalid, scenario_from_file
from .scene import HeldState, SceneObject, SemanticAction, build_dictionary
from .sim import run_scenario
from .wire import replay_frames

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SCENARIO = 3
EXIT_RUNTIME = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nudgesim")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument("--headless", action="store_true", help="no network listener")
    run_p.add_argument("--log", default=None, help="write the event log here (JSONL)")
    run_p.add_argument("--bind", default="127.0.0.1:8765", help="host:port for the session server")
    run_p.add_argument("--realtime-factor", type=float, default=1.0)

    rep_p = sub.add_parser("replay", help="re-broadcast a recorded log")
    rep_p.add_argument("--log", required=True)
    rep_p.add_argument("--speed", type=float, default=1.0)
    rep_p.add_argument("--bind", default=None, help="host:port; omit to print frames to stdout")

    rec_p = sub.add_parser("recall-exp", help="correction-recall experiment")
    rec_p.add_argument("--n", default="0,5,10,15", help="comma-separated step counts")
    rec_p.add_argument("--trials", type=int, default=20)
    rec_p.add_argument("--client", choices=["mock", "live"], default="mock")
    rec_p.add_argument(
        "--mock-behavior",
        default="perfect",
        help="perfect, or forget:<k> to limit recall to the last k exchanges",
    )
    rec_p.add_argument("--endpoint", default=None, help="live chat-completions URL")
    rec_p.add_argument("--model", default=None)
    rec_p.add_argument("--token-env", default="NUDGESIM_API_TOKEN")
    rec_p.add_argument("--out", default=None, help="CSV path (default stdout)")

    plot_p = sub.add_parser("plot", help="dump time-series CSVs from a log")
    plot_p.add_argument("--log", required=True)
    plot_p.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_run(args) -> int:
    try:
        scenario = scenario_from_file(args.scenario)
    except FileNotFoundError:
        print(f"scenario file not found: {args.scenario}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioInvalid as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    try:
        if args.headless:
            log = run_scenario(scenario)
        else:
            from .server import BindFailure, serve_session

            host, _, port = args.bind.rpartition(":")
            try:
                log = serve_session(
                    scenario, host or "127.0.0.1", int(port), realtime_factor=args.realtime_factor
                )
            except BindFailure as exc:
                print(str(exc), file=sys.stderr)
                return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.log:
        log.write(args.log)
    print(f"run complete: {len(log.records)} events", file=sys.stderr)
    return EXIT_OK


def _cmd_replay(args) -> int:
    try:
        log = EventLog.read(args.log)
    except FileNotFoundError:
        print(f"log file not found: {args.log}", file=sys.stderr)
        return EXIT_USAGE
    frames = replay_frames(log)
    if args.bind is None:
        for frame in frames:
            print(frame)
        print(f"replayed {len(frames)} frames", file=sys.stderr)
        return EXIT_OK
    import asyncio

    import websockets

    async def _serve():
        host, _, port = args.bind.rpartition(":")

        async def handler(ws):
            interval = (1.0 / 30.0) / max(args.speed, 1e-6)
            for frame in frames:
                await ws.send(frame)
                await asyncio.sleep(interval)
            await ws.close()

        server = await websockets.serve(handler, host or "127.0.0.1", int(port))
        print(f"replaying {len(frames)} frames on {args.bind}", file=sys.stderr)
        await server.wait_closed()

    try:
        asyncio.run(_serve())
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def _recall_setup() -> RecallTrialState:
    objects = [
        SceneObject("pot", "cooking pot", "A", Pose([0.3, -0.1, 0.1])),
        SceneObject("water", "gallon of water", "A", Pose([0.1, -0.4, 0.1])),
        SceneObject("stove", "on the stove", "B", Pose([0.5, 0.2, 0.1])),
        SceneObject("counter", "on the counter", "B", Pose([0.5, -0.2, 0.1])),
        SceneObject("beans", "beans", "C", Pose([0.3, -0.1, 0.15]), atop="pot"),
    ]
    state_held = HeldState(robot_holding="pot")
    filler_held = HeldState()
    return RecallTrialState(
        objects=objects,
        state_held=state_held,
        state_dictionary=build_dictionary(objects, state_held),
        corrected=SemanticAction("place", "stove"),
        filler_held=filler_held,
        filler_dictionary=build_dictionary(objects, filler_held),
        filler_targets=["beans", "water", "counter", "stove", "pot"],
    )


def _cmd_recall(args) -> int:
    try:
        n_values = [int(v) for v in args.n.split(",") if v.strip() != ""]
    except ValueError:
        print(f"invalid --n list: {args.n}", file=sys.stderr)
        return EXIT_USAGE
    if args.client == "mock":
        behavior = args.mock_behavior
        if behavior == "perfect":
            window = None
        elif behavior.startswith("forget:"):
            try:
                window = int(behavior.split(":", 1)[1])
            except ValueError:
                print(f"invalid --mock-behavior: {behavior}", file=sys.stderr)
                return EXIT_USAGE
        else:
            print(f"invalid --mock-behavior: {behavior}", file=sys.stderr)
            return EXIT_USAGE
        factory = lambda: MockClient(RecallPolicy(default="# Move ; beans &", window=window))
    else:
        if not args.endpoint or not args.model:
            print("live client needs --endpoint and --model", file=sys.stderr)
            return EXIT_USAGE
        cfg = LiveClientConfig(endpoint=args.endpoint, model=args.model, token_env=args.token_env)
        factory = lambda: LiveClient(cfg)
    try:
        results = recall_experiment(factory, _recall_setup(), n_values, args.trials)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"recall experiment failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    rows = [("n", "success_rate", "trials", "errors")] + [
        (r.n, f"{r.rate:.4f}", r.trials, r.errors) for r in results
    ]
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(rows)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerows(rows)
    return EXIT_OK


def _cmd_plot(args) -> int:
    try:
        log = EventLog.read(args.log)
    except FileNotFoundError:
        print(f"log file not found: {args.log}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output dir: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    conf = log.by_kind("confidence_sample")
    with open(out / "confidence.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "c_lin", "c_rot"])
        for r in conf:
            w.writerow([r.time, r.data["c_lin"], r.data["c_rot"]])
    with open(out / "resample_rate.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "resample_rate"])
        for r in conf:
            w.writerow([r.time, r.data["resample_rate"]])
    with open(out / "estimate.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "x", "y", "z", "qw", "qx", "qy", "qz"] + [f"a{i}" for i in range(6)])
        for r in log.by_kind("estimate_sample"):
            w.writerow([r.time] + list(r.data["attractor"]) + list(r.data["dynamics"]))
    with open(out / "wrench.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "fx", "fy", "fz", "tx", "ty", "tz", "hx", "hy", "hz", "htx", "hty", "htz"])
        for r in log.by_kind("wrench_sample"):
            w.writerow([r.time] + list(r.data["command"]) + list(r.data["human"]))
    print(f"wrote 4 series files to {out}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handlers = {
        "run": _cmd_run,
        "replay": _cmd_replay,
        "recall-exp": _cmd_recall,
        "plot": _cmd_plot,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
