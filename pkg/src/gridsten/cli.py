"""Command-line entry point: ``gridsten <subcommand> [flags]``.

Every subcommand accepts ``--config FILE`` with one ``key=value`` per line
(``#`` starts a comment). Keys are flag names with or without the leading
dashes; flags given on the command line win over the file.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import demos
from .bench import bench
from .cahn_hilliard import CHParams, MemorySink, run
from .diagnostics import is_power_of_two
from .fileio import FileSink, format_diagnostics, write_snapshot

SUBCOMMANDS = ("demo-x", "demo-x-fun", "demo-xy", "weno-demo", "ch-run", "ch-bench")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    params: CHParams | None = None
    num_workers: int = 1
    num_tiles: int = 1
    out: Path | None = None
    snapshot_dir: Path | None = None
    snapshot_every: int | None = None
    diag_every: int = 1
    n_list: list[int] = field(default_factory=list)
    nx: int | None = None
    ny: int | None = None
    dt_factor: float = 0.1

    def validate(self) -> "RunConfig":
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.diag_every < 1:
            raise ConfigError("--diag-every must be >= 1")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            raise ConfigError("--snapshot-every must be >= 1")
        if self.num_workers < 1 or self.num_tiles < 1:
            raise ConfigError("--workers and --tiles must be >= 1")
        for n in self.n_list:
            if n < 32 or not is_power_of_two(n):
                raise ConfigError(f"--N-list entries must be powers of two >= 32, got {n}")
        if self.out is not None and self.out.is_dir():
            raise ConfigError(f"output path {self.out} is a directory")
        return self


def parse_n_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad N-list {text!r}") from None


def read_config(path) -> dict[str, str]:
    """Parse a key=value file into raw strings keyed by flag destination."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--workers", dest="workers", type=int, default=1)
    p.add_argument("--tiles", dest="tiles", type=int, default=None,
                   help="row tiles (default: one per worker)")
    p.add_argument("--out", type=Path, default=None)


def _add_grid(p: argparse.ArgumentParser, nx: int, ny: int) -> None:
    p.add_argument("--nx", type=int, default=nx)
    p.add_argument("--ny", type=int, default=ny)


def _add_physics(p: argparse.ArgumentParser) -> None:
    d = CHParams()
    p.add_argument("--T", dest="T", type=float, default=d.T)
    p.add_argument("--dt-factor", type=float, default=0.1, help="dt = factor * dx")
    p.add_argument("--D", dest="D", type=float, default=d.D)
    p.add_argument("--gamma", type=float, default=d.gamma)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--amplitude", type=float, default=d.ic_amplitude)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="gridsten", description="Stencil demos, Cahn-Hilliard runs and benchmarks."
    )
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    subs = {}

    p = sub.add_parser("demo-x", help="8th-order d2/dx2 of sin(x), non-periodic")
    _add_common(p)
    _add_grid(p, 1024, 512)
    subs["demo-x"] = p

    p = sub.add_parser("demo-x-fun", help="d2/dx2 of sin(x) via a function stencil")
    _add_common(p)
    _add_grid(p, 1024, 512)
    subs["demo-x-fun"] = p

    p = sub.add_parser("demo-xy", help="periodic cross derivative of sin(x)sin(y)")
    _add_common(p)
    _add_grid(p, 256, 256)
    subs["demo-xy"] = p

    p = sub.add_parser("weno-demo", help="WENO5 advection term in a rotating flow")
    _add_common(p)
    _add_grid(p, 128, 128)
    subs["weno-demo"] = p

    p = sub.add_parser("ch-run", help="Cahn-Hilliard run writing t,s,k1_inv as CSV")
    _add_common(p)
    _add_grid(p, 512, 512)
    _add_physics(p)
    p.add_argument("--diag-every", type=int, default=1, help="diagnostics cadence in steps")
    p.add_argument("--snapshot-every", type=int, default=None, help="snapshot cadence in steps")
    p.add_argument("--snapshot-dir", type=Path, default=None)
    subs["ch-run"] = p

    p = sub.add_parser("ch-bench", help="serial vs parallel stepping time")
    _add_common(p)
    _add_physics(p)
    p.set_defaults(workers=4, T=10.0)
    p.add_argument("--N-list", dest="n_list", type=parse_n_list, default=[64, 128, 256])
    subs["ch-bench"] = p
    return parser, subs


def _coerce(p: argparse.ArgumentParser, raw: dict[str, str]) -> dict:
    actions = {a.dest: a for a in p._actions if a.dest not in ("help", "config")}
    out = {}
    for key, value in raw.items():
        if key not in actions:
            raise ConfigError(f"unknown config key {key!r}")
        act = actions[key]
        conv = act.type or str
        try:
            out[key] = conv(value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return out


def parse_args(argv) -> tuple[argparse.Namespace, RunConfig]:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        raise SystemExit(2)
    if args.config:
        p = subs[args.subcommand]
        p.set_defaults(**_coerce(p, read_config(args.config)))
        args = parser.parse_args(argv)
    return args, to_run_config(args)


def to_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(
        subcommand=args.subcommand,
        num_workers=args.workers,
        num_tiles=args.tiles if args.tiles is not None else args.workers,
        out=args.out,
        nx=getattr(args, "nx", None),
        ny=getattr(args, "ny", None),
    )
    if args.subcommand == "ch-run":
        cfg.params = CHParams.with_dt_factor(
            args.dt_factor, nx=args.nx, ny=args.ny, T=args.T, D=args.D,
            gamma=args.gamma, seed=args.seed, ic_amplitude=args.amplitude,
        )
        cfg.diag_every = args.diag_every
        cfg.snapshot_every = args.snapshot_every
        cfg.snapshot_dir = args.snapshot_dir
        if cfg.snapshot_every is not None and cfg.snapshot_dir is None:
            raise ConfigError("--snapshot-every needs --snapshot-dir")
    elif args.subcommand == "ch-bench":
        cfg.n_list = list(args.n_list)
        # nx/ny come from the N-list; this only checks the physics flags
        cfg.params = CHParams.with_dt_factor(
            args.dt_factor, nx=32, ny=32, T=args.T, D=args.D, gamma=args.gamma,
            seed=args.seed, ic_amplitude=args.amplitude,
        )
        cfg.dt_factor = args.dt_factor
    return cfg.validate()


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_demo(cfg: RunConfig) -> int:
    fn = {
        "demo-x": demos.demo_x,
        "demo-x-fun": demos.demo_x_fun,
        "demo-xy": demos.demo_xy,
        "weno-demo": demos.demo_weno,
    }[cfg.subcommand]
    res = fn(cfg.nx, cfg.ny, min(cfg.num_tiles, cfg.ny), cfg.num_workers)
    print(res.summary())
    if cfg.out is not None:
        write_snapshot(res.computed, cfg.out)
    return 0


def cmd_ch_run(cfg: RunConfig) -> int:
    p = cfg.params
    tiles = min(cfg.num_tiles, p.ny)
    if cfg.out is None:
        sink = MemorySink()
        run(p, sink, cfg.diag_every, None, cfg.num_workers, tiles)
        sys.stdout.write(format_diagnostics(sink.rows))
        return 0
    with FileSink(cfg.out, cfg.snapshot_dir) as sink:
        run(p, sink, cfg.diag_every, cfg.snapshot_every, cfg.num_workers, tiles)
    return 0


def cmd_ch_bench(cfg: RunConfig) -> int:
    p = cfg.params
    report = bench(
        cfg.n_list,
        num_workers=cfg.num_workers,
        num_tiles=cfg.num_tiles,
        T=p.T,
        dt_factor=cfg.dt_factor,
        log=lambda msg: print(msg, file=sys.stderr),
        D=p.D,
        gamma=p.gamma,
        seed=p.seed,
        ic_amplitude=p.ic_amplitude,
    )
    _emit(report.to_csv(), cfg.out)
    print(f"# serial exponent: {report.serial_exponent:.4f}")
    for r in report.rows:
        flag = "identical" if r.identical else "DIFFERENT"
        print(f"# N={r.n} checksum serial {r.checksum_serial} parallel {r.checksum_parallel} {flag}")
    return 0 if all(r.identical for r in report.rows) else 1


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        _, cfg = parse_args(argv)
        if cfg.subcommand == "ch-run":
            return cmd_ch_run(cfg)
        if cfg.subcommand == "ch-bench":
            return cmd_ch_bench(cfg)
        return cmd_demo(cfg)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except (ValueError, OSError) as exc:
        print(f"gridsten: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
