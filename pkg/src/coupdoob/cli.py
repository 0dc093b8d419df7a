"""Command-line front end: ``coupdoob {verify,curve,simulate,gallery}``.

Exit status: 0 on success, 1 on input errors, 2 when ``verify --expect``
does not match the computed classification.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import chainfile, gallery
from .analysis import LABELS, ExactModeError, evolve_coupled, verify_doob
from .chain import ChainError, FiniteChain, Dist, invariant_measures
from .countable import CountableChain
from .coupling import (
    AssumptionsFail,
    hybrid_kernel,
    independent_kernel,
    maximal_kernel,
    select_doeblin,
)
from .montecarlo import (
    CountableCoupling,
    estimate_hit_probability,
    estimate_uncoupled_tail,
    nonconvergence_lower_bound,
)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    file: str | None = None
    gallery: str | None = None
    n_max: int = 20
    horizon: int = 10_000
    replicas: int = 10_000
    seed: int = 0
    format: str = "table"
    out: str | None = None
    expect: str | None = None

    def __post_init__(self):
        if self.command in ("verify", "curve", "simulate"):
            if (self.file is None) == (self.gallery is None):
                raise UsageError("give exactly one of --file or --gallery")
        for name in ("n_max", "horizon", "replicas"):
            if getattr(self, name) < 1:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")

    def chain(self):
        if self.file is not None:
            return chainfile.load(self.file)
        return gallery.parse_spec(self.gallery)


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _render(columns: list[str], rows: list[list], kind: str) -> str:
    if kind == "json":
        return json.dumps([dict(zip(columns, r)) for r in rows], indent=2) + "\n"
    cells = [[fmt(v) for v in r] for r in rows]
    if kind == "csv":
        return "\n".join(",".join(r) for r in [columns] + cells) + "\n"
    widths = [max(len(c), *(len(r[k]) for r in cells)) if cells else len(c)
              for k, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


def _find_state(chain, token: str):
    if isinstance(chain, CountableChain):
        try:
            return int(token)
        except ValueError:
            raise ChainError(f"unknown state {token!r}") from None
    for s in chain.states:
        if str(s) == token:
            return s
    raise ChainError(f"unknown state {token!r}")


def _pair(chain, text: str | None):
    if text is None:
        if isinstance(chain, CountableChain):
            return None
        if chain.size < 2:
            return chain.states[0], chain.states[0]
        return chain.states[0], chain.states[1]
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError("--pair takes two comma-separated states")
    return _find_state(chain, parts[0].strip()), _find_state(chain, parts[1].strip())


def _finite(chain, advice: str) -> FiniteChain:
    if not isinstance(chain, FiniteChain):
        raise ChainError(f"countable chain: exact mode needs a finite chain; {advice}")
    return chain


def cmd_verify(cfg: RunConfig, args) -> tuple[int, str]:
    chain = _finite(cfg.chain(), "use `simulate`")
    v = verify_doob(chain, n_max=cfg.n_max, horizon=cfg.horizon)
    if cfg.format == "json":
        text = json.dumps(v.to_dict(), indent=2) + "\n"
    else:
        rows = [
            ["classification", v.classification],
            ["summary", v.summary],
            ["ipm_count", v.ipm_count],
            ["thm1_holds", v.thm1_holds],
            ["cor1_holds", v.cor1_holds],
            ["thm2_holds", " ".join(fmt(b) for b in v.thm2_holds)],
            ["conclusion_allx", v.conclusion_allx],
            ["conclusion_mu_ae", v.conclusion_mu_ae],
            ["monotone", v.monotone],
        ]
        for k, mu in enumerate(v.ipms):
            rows.append([f"ipm[{k}]", " ".join(fmt(float(w)) for w in mu.weights)])
        text = _render(["field", "value"], rows, "csv" if cfg.format == "csv" else "table")
    status = 0
    if cfg.expect is not None and cfg.expect != v.classification:
        status = 2
    return status, text


def _kernel(chain: FiniteChain, kind: str, mu: Dist, doeblin_n_max: int):
    if kind == "maximal":
        return maximal_kernel(chain)
    if kind == "independent":
        return independent_kernel(chain)
    try:
        return hybrid_kernel(chain, select_doeblin(chain, mu, doeblin_n_max))
    except AssumptionsFail as exc:
        raise ChainError(f"cannot build hybrid kernel: {exc}") from None


def cmd_curve(cfg: RunConfig, args) -> tuple[int, str]:
    chain = _finite(cfg.chain(), "use `simulate`")
    ipms = invariant_measures(chain)
    if not 0 <= args.mu_index < len(ipms):
        raise UsageError(f"--mu-index must be in 0..{len(ipms) - 1}")
    mu = ipms[args.mu_index]
    pair = _pair(chain, args.pair)
    S = _kernel(chain, args.kernel, mu, args.doeblin_n_max)
    try:
        an = evolve_coupled(S, pair, cfg.n_max)
    except ExactModeError as exc:
        raise ChainError(f"{exc}; run `simulate` instead") from None
    P = S.chain.matrix
    V = np.eye(chain.size)
    m = np.array(mu.weights)
    columns = ["n", "base_step"] + [f"tv_mu[{s}]" for s in chain.states] + [
        "tv_mu[mu]", "tv_pair", "uncoupled_tail", "bound_slack"]
    rows = []
    for n in range(cfg.n_max + 1):
        tv_mu = np.abs(V - m).sum(axis=1)
        row = [n, n * S.step] + [float(t) for t in tv_mu]
        row += [float(np.abs(m - mu.weights).sum()), float(an.tv_curve[n]),
                float(an.uncoupled_tail[n]), float(an.bound_slack[n])]
        rows.append(row)
        V = V @ P
        m = m @ P
    return 0, _render(columns, rows, cfg.format)


def cmd_simulate(cfg: RunConfig, args) -> tuple[int, str]:
    chain = cfg.chain()
    x0 = _find_state(chain, args.x0) if args.x0 is not None else (
        0 if isinstance(chain, CountableChain) else chain.states[0])
    target = _find_state(chain, args.target) if args.target is not None else (
        0 if isinstance(chain, CountableChain) else chain.states[0])
    columns = ["quantity", "n", "point", "stderr", "n_samples"]
    rows = []
    hit = estimate_hit_probability(chain, x0, target, cfg.horizon, cfg.replicas, cfg.seed)
    rows.append([f"hit_probability[{x0}->{target}]", cfg.horizon, hit.point, hit.stderr,
                 hit.n_samples])
    absorbing = (
        isinstance(chain, CountableChain) and chain.transitions(target)[0] == (target, 1)
    ) or (isinstance(chain, FiniteChain) and chain.matrix[chain.index(target),
                                                          chain.index(target)] == 1.0)
    if absorbing:
        rows.append([f"tv_limit_lower_bound[{x0}]", cfg.horizon,
                     nonconvergence_lower_bound(hit), None, hit.n_samples])
    pair = _pair(chain, args.pair)
    if pair is not None:
        if isinstance(chain, FiniteChain):
            S = maximal_kernel(chain)
        else:
            S = CountableCoupling(chain)
        tails = estimate_uncoupled_tail(S, pair, cfg.n_max, cfg.replicas, cfg.seed)
        for n, est in enumerate(tails):
            rows.append([f"uncoupled_tail[{pair[0]},{pair[1]}]", n, est.point, est.stderr,
                         est.n_samples])
    return 0, _render(columns, rows, cfg.format)


def cmd_gallery(cfg: RunConfig, args) -> tuple[int, str]:
    if args.action == "list":
        rows = [[e.name, "countable" if e.countable else "finite",
                 ",".join(fmt(p) for p in e.defaults), e.description,
                 json.dumps(e.expected_verdict, sort_keys=True)]
                for e in gallery.ENTRIES.values()]
        return 0, _render(["name", "kind", "defaults", "description", "expected"], rows,
                          cfg.format)
    if not args.name:
        raise UsageError("gallery show needs a NAME[:params]")
    chain = gallery.parse_spec(args.name)
    if isinstance(chain, FiniteChain):
        if cfg.format == "json":
            return 0, chainfile.dumps(chain)
        rows = [[str(s)] + [fmt(float(p)) for p in chain.matrix[i]]
                for i, s in enumerate(chain.states)]
        return 0, _render(["state"] + [str(s) for s in chain.states], rows,
                          "csv" if cfg.format == "csv" else "table")
    rows = [[s, " ".join(f"{t}:{p}" for t, p in chain.transitions(s))] for s in range(4)]
    rows.append(["...", "(same rule for all i >= 1)"])
    return 0, _render(["state", "transitions"], rows, "csv" if cfg.format == "csv" else "table")


COMMANDS = {"verify": cmd_verify, "curve": cmd_curve, "simulate": cmd_simulate,
            "gallery": cmd_gallery}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coupdoob", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n_max=20):
        src = sp.add_argument_group("chain source")
        src.add_argument("--file", help="chain file (JSON)")
        src.add_argument("--gallery", metavar="NAME[:params]", help="gallery chain")
        sp.add_argument("--n-max", type=int, default=n_max)
        sp.add_argument("--horizon", type=int, default=10_000)
        sp.add_argument("--replicas", type=int, default=10_000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=["table", "csv", "json"], default="table")
        sp.add_argument("--out", help="write output here instead of stdout")

    v = sub.add_parser("verify", help="check assumptions and convergence")
    common(v, n_max=100)
    v.add_argument("--expect", choices=LABELS)

    c = sub.add_parser("curve", help="exact TV and coupling curves")
    common(c)
    c.add_argument("--pair", help="starting pair x1,x2 of the coupled chain")
    c.add_argument("--kernel", choices=["maximal", "hybrid", "independent"],
                   default="maximal")
    c.add_argument("--mu-index", type=int, default=0)
    c.add_argument("--doeblin-n-max", type=int, default=5)

    s = sub.add_parser("simulate", help="Monte Carlo estimates")
    common(s)
    s.add_argument("--x0")
    s.add_argument("--target")
    s.add_argument("--pair")

    g = sub.add_parser("gallery", help="list or show gallery chains")
    g.add_argument("action", choices=["list", "show"])
    g.add_argument("name", nargs="?")
    g.add_argument("--format", choices=["table", "csv", "json"], default="table")
    g.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = RunConfig(
            command=args.command,
            file=getattr(args, "file", None),
            gallery=getattr(args, "gallery", None),
            n_max=getattr(args, "n_max", 20),
            horizon=getattr(args, "horizon", 10_000),
            replicas=getattr(args, "replicas", 10_000),
            seed=getattr(args, "seed", 0),
            format=args.format,
            out=args.out,
            expect=getattr(args, "expect", None),
        )
        status, text = COMMANDS[args.command](cfg, args)
    except (UsageError, ChainError) as exc:
        print(f"coupdoob {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if cfg.out:
        with io.open(cfg.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if status == 2:
        print(f"coupdoob verify: expected {cfg.expect}, got a different classification",
              file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
