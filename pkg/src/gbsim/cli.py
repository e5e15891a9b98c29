"""Command-line interface.

Subcommands: simulate, sample, lhaf, clickprob, validate, bench.  Exit codes:
0 success, 2 configuration problems, 3 numerical failures, 4 resource guards.
Every output file embeds a manifest digest derived from the resolved
parameters and master seed, and all randomness is derived from --seed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .clicks import click_probability_exact
from .iofmt import (
    ConfigError,
    RunManifest,
    load_matrix,
    parse_config,
    read_samples,
    read_state,
    seed_streams,
    write_csv,
    write_samples,
    write_state,
)
from .lhaf import (
    KernelError,
    MAX_TERMS,
    lhaf_bruteforce,
    lhaf_eigenvalue_trace,
    lhaf_fds,
    lhaf_repeated,
    matched_reps,
)
from .samplers import ChainRuleSampler, IpsModel, MisSampler, PureTemplate, SamplerError, thin_chain
from .states import (
    StateError,
    build_experiment_state,
    sample_pure_displacement,
    to_complex_rep,
    williamson_decompose,
)
from . import plots, validation

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_GUARD = 4


class GuardError(RuntimeError):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="gbsim", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="build the experiment state and write a fixture")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("sample", help="draw samples from a configured experiment")
    sp.add_argument("--config", required=True)
    sp.add_argument("--sampler", choices=("chain", "mis"), default=None)
    sp.add_argument("--detector", choices=("pnrd", "threshold"), default=None)
    sp.add_argument("--num-samples", type=int, default=None)
    sp.add_argument("--chain-length", type=int, default=None)
    sp.add_argument("--burn-in", type=int, default=None)
    sp.add_argument("--thin", type=int, default=None)
    sp.add_argument("--post-select", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.add_argument("--diagnostics", default=None, help="MIS sidecar CSV (step, accepted, logP, logQ)")

    sp = sub.add_parser("lhaf", help="evaluate a loop hafnian from a matrix file")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--kernel", choices=("bruteforce", "et", "fds", "repeated"), default="fds")
    sp.add_argument("--pattern", default=None, help="comma-separated repetitions per mode")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--force", action="store_true")

    sp = sub.add_parser("clickprob", help="exact threshold click probability")
    sp.add_argument("--state", required=True, help="state fixture file")
    sp.add_argument("--clicks", required=True, help="comma-separated 0/1 pattern")

    sp = sub.add_parser("validate", help="distribution tests and chain diagnostics")
    sp.add_argument("--test", required=True, choices=("tvd", "chog", "tpc", "burnin-likelihood", "burnin-accept", "thin"))
    sp.add_argument("--config", default=None)
    sp.add_argument("--state", default=None)
    sp.add_argument("--trial", default=None)
    sp.add_argument("--adversary", default=None)
    sp.add_argument("--post-select", type=int, default=None)
    sp.add_argument("--detector", choices=("pnrd", "threshold"), default=None)
    sp.add_argument("--max-burn", type=int, default=100)
    sp.add_argument("--num-chains", type=int, default=200)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", required=True, help="CSV output; figure written alongside")

    sp = sub.add_parser("bench", help="kernel timing and scaling-shape report")
    sp.add_argument("--config", default=None)
    sp.add_argument("--kernel", default="fds", choices=("et", "fds"))
    sp.add_argument("--n", default="8..24", help="photon-number range lo..hi")
    sp.add_argument("--step", type=int, default=4)
    sp.add_argument("--reps", type=int, default=5)
    sp.add_argument("--modes", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--force", action="store_true")
    sp.add_argument("--out", required=True)
    return p


def _resolve_seed(args, cfg):
    if getattr(args, "seed", None) is not None:
        return args.seed
    return cfg.rng_seed if cfg is not None else 0


def _figure_path(csv_path):
    base, _ = os.path.splitext(csv_path)
    return base + ".png"


def _guard_terms(term_count, force):
    if term_count > MAX_TERMS and not force:
        raise GuardError(f"{term_count} kernel terms exceed the 2^30 guard; pass --force to override")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args):
    cfg, raw = parse_config(args.config)
    seed = _resolve_seed(args, cfg)
    manifest = RunManifest({"command": "simulate", "config": raw}, seed)
    state = build_experiment_state(cfg)
    write_state(args.out, state, manifest)
    print(f"wrote state fixture {args.out} (digest {manifest.digest})")
    return 0


def _cmd_sample(args):
    cfg, raw = parse_config(args.config)
    sampler_cfg = dict(raw.get("sampler", {}))
    sampler = args.sampler or sampler_cfg.get("sampler", "chain")
    detector = args.detector or cfg.detector
    if detector != cfg.detector:
        cfg = type(cfg)(**{**cfg.__dict__, "detector": detector})
    num = args.num_samples if args.num_samples is not None else sampler_cfg.get("num_samples", 1000)
    chain_len = args.chain_length if args.chain_length is not None else sampler_cfg.get("chain_length", num)
    burn = args.burn_in if args.burn_in is not None else sampler_cfg.get("burn_in", 0)
    thin = args.thin if args.thin is not None else sampler_cfg.get("thin", 1)
    post = args.post_select if args.post_select is not None else sampler_cfg.get("post_select")
    seed = _resolve_seed(args, cfg)
    manifest = RunManifest(
        {
            "command": "sample",
            "config": raw,
            "sampler": sampler,
            "detector": detector,
            "num_samples": num,
            "chain_length": chain_len,
            "burn_in": burn,
            "thin": thin,
            "post_select": post,
        },
        seed,
    )
    rngs = seed_streams(seed, ["sampling"])
    rng = rngs["sampling"]
    state = build_experiment_state(cfg)
    t0 = time.perf_counter()
    if sampler == "chain":
        cs = ChainRuleSampler(state, cfg, workers=args.workers)
        if detector == "pnrd":
            samples = [cs.sample_pnrd(rng) for _ in range(num)]
        else:
            samples = [cs.sample_threshold(rng).clicks for _ in range(num)]
        diags = None
    else:
        ms = MisSampler(state, cfg, workers=args.workers)
        if detector == "pnrd":
            chain = ms.chain_pnrd(chain_len, rng, post_select=post)
        else:
            chain = ms.chain_threshold(chain_len, rng, post_select=post)
        pats = thin_chain(chain, burn, thin)
        samples = [p.clicks if hasattr(p, "clicks") else p for p in pats]
        diags = [
            (i, int(s.accepted), f"{s.log_target:.9e}", f"{s.log_proposal:.9e}")
            for i, s in enumerate(chain)
        ]
    manifest.timing["seconds"] = round(time.perf_counter() - t0, 3)
    write_samples(args.out, samples, manifest)
    if diags is not None and args.diagnostics:
        write_csv(args.diagnostics, ["step", "accepted", "log_target", "log_proposal"], diags, manifest)
    print(f"wrote {len(samples)} samples to {args.out} (digest {manifest.digest})")
    return 0


def _cmd_lhaf(args):
    A = load_matrix(args.matrix)
    pattern = None
    if args.pattern:
        pattern = [int(v) for v in args.pattern.split(",")]
        if len(pattern) != A.shape[0]:
            raise ConfigError("pattern length must equal the matrix dimension")
    t0 = time.perf_counter()
    if args.kernel == "bruteforce":
        if pattern:
            raise ConfigError("bruteforce takes the expanded matrix, not a pattern")
        terms = 0
        val = lhaf_bruteforce(A)
    elif args.kernel in ("et", "fds"):
        if pattern:
            raise ConfigError(f"kernel {args.kernel} takes the expanded matrix, not a pattern")
        terms = 2 ** ((A.shape[0] + 1) // 2)
        _guard_terms(terms, args.force)
        val = (lhaf_eigenvalue_trace if args.kernel == "et" else lhaf_fds)(A, workers=args.workers)
    else:
        if pattern is None:
            pattern = [1] * A.shape[0]
        matching = matched_reps(pattern)
        terms = matching.term_count
        _guard_terms(terms, args.force)
        val = lhaf_repeated(A, np.diagonal(A), matching=matching, workers=args.workers)
    dt = time.perf_counter() - t0
    print(f"lhaf = {complex(val)!r}")
    print(f"terms = {terms}")
    print(f"seconds = {dt:.6f}")
    return 0


def _cmd_clickprob(args):
    state = read_state(args.state)
    clicks = [int(v) for v in args.clicks.split(",")]
    if len(clicks) != state.modes:
        raise ConfigError("click pattern length must equal the mode count")
    rep = to_complex_rep(state)
    p = click_probability_exact(rep, clicks)
    print(f"P(clicks={','.join(map(str, clicks))}) = {p!r}")
    return 0


def _cmd_validate(args):
    seed = args.seed if args.seed is not None else 0
    cfg = raw = None
    if args.config:
        cfg, raw = parse_config(args.config)
        seed = _resolve_seed(args, cfg)
    manifest = RunManifest({"command": "validate", "test": args.test, "config": raw}, seed)
    fig = _figure_path(args.out)

    if args.test == "tvd":
        if not (args.trial and (args.state or args.config)):
            raise ConfigError("tvd needs --trial and a state (--state or --config)")
        state = read_state(args.state) if args.state else build_experiment_state(cfg)
        rep = to_complex_rep(state)
        samples, _ = read_samples(args.trial)
        detector = args.detector or (cfg.detector if cfg else "pnrd")
        if args.post_select is not None:
            samples = samples[samples.sum(axis=1) == args.post_select]
            total = args.post_select
        else:
            raise ConfigError("tvd requires --post-select to fix the comparison set")
        exact = validation.exact_distribution(rep, detector, total, workers=args.workers)
        emp = validation.empirical_distribution(samples)
        dist = validation.tvd(emp, exact)
        rows = [(",".join(map(str, k)), exact.as_dict().get(k, 0.0), emp.as_dict().get(k, 0.0))
                for k in sorted(set(exact.outcomes) | set(emp.outcomes))]
        write_csv(args.out, ["outcome", "exact", "empirical"], rows, manifest)
        plots.plot_distribution_comparison(fig, emp, exact)
        print(f"TVD = {dist:.6f} over {len(rows)} outcomes ({len(samples)} samples)")
    elif args.test == "chog":
        if not (args.trial and args.adversary and (args.state or args.config)):
            raise ConfigError("chog needs --trial, --adversary and a state")
        state = read_state(args.state) if args.state else build_experiment_state(cfg)
        rep = to_complex_rep(state)
        trial, _ = read_samples(args.trial)
        adv, _ = read_samples(args.adversary)
        n = min(len(trial), len(adv))
        trace = validation.chog_ratio(trial[:n], adv[:n], rep, workers=args.workers)
        rows = list(zip(range(1, n + 1), trace.per_sample_log_ratios, trace.running_ratio))
        write_csv(args.out, ["pair", "log_ratio", "running_ratio"], rows, manifest)
        plots.plot_chog_trace(fig, [trace], ["trial vs adversary"])
        print(f"CHOG ratio after {n} pairs: {trace.running_ratio[-1]:.6f}")
    elif args.test == "tpc":
        if not (args.trial and (args.state or args.config)):
            raise ConfigError("tpc needs --trial and a state")
        state = read_state(args.state) if args.state else build_experiment_state(cfg)
        rep = to_complex_rep(state)
        trial, _ = read_samples(args.trial)
        c_emp = validation.two_point_correlators(trial)
        c_exact = validation.two_point_correlators(rep)
        iu = np.triu_indices(rep.modes, k=1)
        series = [c_emp[iu], c_exact[iu]]
        labels = ["trial", "exact"]
        if args.adversary:
            adv, _ = read_samples(args.adversary)
            series.append(validation.two_point_correlators(adv)[iu])
            labels.append("adversary")
        rows = [(i, j, c_exact[i, j], c_emp[i, j]) for i, j in zip(*iu)]
        write_csv(args.out, ["i", "j", "exact", "trial"], rows, manifest)
        plots.plot_correlator_histograms(fig, series, labels)
        from scipy.stats import ks_2samp

        stat = ks_2samp(series[0], series[1])
        print(f"KS trial-vs-exact p = {stat.pvalue:.4g}")
    elif args.test == "thin":
        if not args.trial:
            raise ConfigError("thin needs --trial (raw chain sample file)")
        patterns, _ = read_samples(args.trial)
        grid = np.arange(1, max(2, len(patterns) // 50))
        grid, curve = validation.repeat_probability_vs_thinning(list(patterns), grid)
        tau = validation.thinning_at_level(grid, curve)
        write_csv(args.out, ["thinning", "repeat_probability"], list(zip(grid, curve)), manifest)
        plots.plot_burnin_curve(fig, curve, "repeat probability", tau)
        print(f"thinning interval at repeat probability 0.1: {tau}")
    else:  # burn-in tests need chains from a config
        if cfg is None:
            raise ConfigError("burn-in tests need --config")
        state = build_experiment_state(cfg)
        ms = MisSampler(state, cfg, workers=args.workers)
        post = args.post_select
        streams = seed_streams(seed, [f"chain{i}" for i in range(args.num_chains)])

        def factory(i, length):
            rng = streams[f"chain{i}"]
            if args.test == "burnin-likelihood" or cfg.detector == "pnrd":
                return ms.chain_pnrd(length, rng, post_select=post)
            return ms.chain_threshold(length, rng, post_select=post)

        if args.test == "burnin-likelihood":
            logqp = _estimate_log_qn_minus_pn(ms, cfg, post, seed) if post is not None else 0.0
            burn, sizes, _ = validation.likelihood_burnin_test(
                factory, args.max_burn, args.num_chains, logqp
            )
            write_csv(args.out, ["burn_in", "sample_size_to_0.95"], list(enumerate(sizes)), manifest)
            plots.plot_burnin_curve(fig, sizes, "samples to likelihood 0.95", burn)
            print(f"likelihood burn-in estimate: {burn}")
        else:
            burn, curve = validation.acceptance_rate_burnin_test(factory, args.max_burn, args.num_chains)
            write_csv(args.out, ["step", "acceptance_rate"], list(enumerate(curve)), manifest)
            plots.plot_burnin_curve(fig, curve, "acceptance rate", burn)
            print(f"acceptance-rate burn-in estimate: {burn}")
    return 0


def _estimate_log_qn_minus_pn(ms: MisSampler, cfg, post, seed, draws=20000):
    """Monte-Carlo log Q(N) - log P(N) for post-selected likelihoods."""
    rngs = seed_streams(seed + 1, ["qn", "pn"])
    hits_q = 0
    for _ in range(draws):
        meanp = sample_pure_displacement(ms.dec, ms.state.mean, rngs["qn"])
        alpha = ms.template.alpha(meanp)
        n = IpsModel.from_template(ms.template, alpha).sample(rngs["qn"])
        hits_q += int(n.sum() == post)
    cs = ChainRuleSampler(ms.state, cfg)
    hits_p = 0
    p_draws = max(2000, draws // 10)
    for _ in range(p_draws):
        n = cs.sample_pnrd(rngs["pn"])
        hits_p += int(n.sum() == post)
    if hits_q == 0 or hits_p == 0:
        raise SamplerError("cannot estimate P(N)/Q(N); post-selection too rare")
    return math.log(hits_q / draws) - math.log(hits_p / p_draws)


def _cmd_bench(args):
    lo, hi = (int(v) for v in args.n.split(".."))
    rng = np.random.default_rng(args.seed)
    manifest = RunManifest(
        {"command": "bench", "kernel": args.kernel, "n": args.n, "step": args.step, "modes": args.modes},
        args.seed,
    )
    # IPS-drawn patterns from a squeezing-only fixture supply realistic collisions
    from .states import ExperimentConfig

    cfg = ExperimentConfig(modes=args.modes, squeezing=1.55, transmission=0.3, rng_seed=args.seed)
    state = build_experiment_state(cfg)
    dec = williamson_decompose(state)
    tmpl = PureTemplate(dec.T)
    model = IpsModel.from_template(tmpl, tmpl.alpha(state.mean))
    plain = lhaf_fds if args.kernel == "fds" else lhaf_eigenvalue_trace
    rows = []
    for N in range(lo, hi + 1, args.step):
        _guard_terms(2 ** (N // 2), args.force)
        for _ in range(args.reps):
            n = model.sample(rng)
            while n.sum() != N:
                n = model.sample(rng)
            matching = matched_reps(n)
            B = tmpl.B
            loops = tmpl.gamma_half(tmpl.alpha(state.mean))
            idx = np.repeat(np.arange(args.modes), n)
            expanded = B[np.ix_(idx, idx)].astype(complex)
            np.fill_diagonal(expanded, loops[idx])
            t0 = time.perf_counter()
            plain(expanded, workers=args.workers)
            t_plain = time.perf_counter() - t0
            t0 = time.perf_counter()
            lhaf_repeated(B, loops, pattern=n, workers=args.workers)
            t_rep = time.perf_counter() - t0
            rows.append((N, args.kernel, 2 ** (N // 2), f"{t_plain:.6f}"))
            rows.append((N, "repeated", matching.term_count, f"{t_rep:.6f}"))
    write_csv(args.out, ["N", "kernel", "terms", "seconds"], rows, manifest)
    # fit the per-photon exponent of the no-collision kernel
    ns = sorted({r[0] for r in rows})
    med = [np.median([float(r[3]) for r in rows if r[0] == n and r[1] == args.kernel]) for n in ns]
    slope = np.polyfit(ns, np.log(med), 1)[0]
    plot_rows = [(r[0], r[1], r[2], float(r[3])) for r in rows]
    plots.plot_scaling(_figure_path(args.out), plot_rows, slope)
    print(f"fitted per-photon exponent: {slope:.4f}")
    speed = [
        np.median([float(r[3]) for r in rows if r[0] == n and r[1] == args.kernel])
        / np.median([float(r[3]) for r in rows if r[0] == n and r[1] == "repeated"])
        for n in ns
    ]
    print(f"median collision speedup at N={ns[-1]}: {speed[-1]:.2f}x")
    return 0


def main(argv=None):
    args = _parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "sample": _cmd_sample,
        "lhaf": _cmd_lhaf,
        "clickprob": _cmd_clickprob,
        "validate": _cmd_validate,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GuardError, ResourceWarning) as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (StateError, KernelError, SamplerError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure in {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
