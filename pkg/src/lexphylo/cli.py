"""Command-line interface and the end-to-end pipeline."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import align, corpus, encode, eval as evaluation, patterns
from .errors import LexphyloError
from .phylo import mcmc, search
from .phylo.model import BinaryCTMC, GammaRates, discretize_gamma
from .phylo.simulate import simulate_matrix
from .phylo.tree import parse_newick, parse_newick_many, write_newick

log = logging.getLogger("lexphylo")

CHARACTER_TYPES = evaluation.CHARACTER_TYPES
INFERENCE = ("ml", "mcmc", "both")


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


def derive_seed(master: int, stage: str, index: int = 0) -> int:
    """Seed for one stochastic component: the master seed plus a stable hash of "stage:index"."""
    key = zlib.crc32(f"{stage}:{index}".encode("utf-8"))
    return int(np.random.SeedSequence([int(master), key]).generate_state(1, np.uint64)[0])


@dataclass
class MLSettings:
    n_random: int = 10
    n_parsimony: int = 10
    categories: int = 4
    conditioned: bool = False


@dataclass
class MCMCSettings:
    generations_max: int = 1_000_000
    sample_every: int = 1000
    burnin_fraction: float = 0.25
    asdsf_target: float = 0.01
    runs: int = 2
    alpha_prior: str = "uniform"
    min_samples: int = 20
    n_posterior: int = 1000

    def to_config(self, seed: int) -> mcmc.McmcConfig:
        return mcmc.McmcConfig(seed=seed, **asdict(self))


@dataclass
class ScoringSettings:
    match: float = 1.0
    mismatch: float = -1.0
    gap: float = -1.0


@dataclass
class PipelineConfig:
    wordlist: str
    gold_tree: str
    output_dir: str
    seed: int
    dataset: str = ""
    tau: float = 0.5
    scoring: ScoringSettings = field(default_factory=ScoringSettings)
    character_types: list[str] = field(default_factory=lambda: list(CHARACTER_TYPES))
    inference: str = "ml"
    ml: MLSettings = field(default_factory=MLSettings)
    mcmc: MCMCSettings = field(default_factory=MCMCSettings)

    def __post_init__(self):
        for name in ("wordlist", "gold_tree", "output_dir"):
            if not getattr(self, name):
                raise LexphyloError(f"config: {name} must be a non-empty path")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise LexphyloError("config: seed must be an integer")
        if isinstance(self.character_types, str):
            self.character_types = [self.character_types]
        bad = [t for t in self.character_types if t not in CHARACTER_TYPES]
        if bad or not self.character_types:
            raise LexphyloError(f"config: character_types must be drawn from {CHARACTER_TYPES}")
        if self.inference not in INFERENCE:
            raise LexphyloError(f"config: inference must be one of {INFERENCE}")
        if not 0 <= self.tau <= 1:
            raise LexphyloError("config: tau must be in [0, 1]")
        for name, cls in (("scoring", ScoringSettings), ("ml", MLSettings), ("mcmc", MCMCSettings)):
            value = getattr(self, name)
            if isinstance(value, dict):
                setattr(self, name, _build(cls, value, name))
        if not self.dataset:
            self.dataset = Path(self.wordlist).stem

    @classmethod
    def from_dict(cls, data: dict, base: Path | None = None) -> "PipelineConfig":
        if "seed" not in data:
            raise LexphyloError("config: seed is required")
        config = _build(cls, data, "config")
        if base is not None:
            # input paths are relative to the config file, the output directory to the working directory
            for name in ("wordlist", "gold_tree"):
                path = Path(getattr(config, name))
                if not path.is_absolute():
                    setattr(config, name, str(base / path))
        return config

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise LexphyloError(f"config: invalid JSON ({exc})") from exc
        return cls.from_dict(data, base=path.parent)


def _build(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise LexphyloError(f"{where}: unknown keys {unknown}")
    return cls(**data)


# --- pipeline ----------------------------------------------------------------------


def _stage(name):
    def wrap(fn):
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except (LexphyloError, ValueError, OSError, KeyError) as exc:
                raise StageError(name, exc) from exc

        return run

    return wrap


@_stage("parse")
def _parse(config: PipelineConfig):
    wordlist = corpus.read_wordlist(config.wordlist)
    gold = parse_newick(Path(config.gold_tree).read_text(encoding="utf-8"))
    return wordlist, gold


@_stage("align")
def _align(config, wordlist):
    s = config.scoring
    scheme = align.ScoringScheme(s.match, s.mismatch, s.gap)
    return align.align_wordlist(wordlist, scheme)


@_stage("trim")
def _trim(config, alignments):
    return [align.trim_alignment(a, config.tau) for a in alignments]


@_stage("patterns")
def _patterns(trimmed):
    return patterns.detect_patterns(patterns.extract_sites(trimmed))


@_stage("encode")
def _encode(config, wordlist, found):
    cognates = encode.encode_cognates(wordlist)
    pattern_matrix = encode.encode_patterns(found, wordlist)
    matrices = {
        "cognates": cognates,
        "patterns": pattern_matrix,
        "combined": encode.concatenate(cognates, pattern_matrix),
    }
    return {t: matrices[t] for t in CHARACTER_TYPES if t in config.character_types}


@_stage("infer-ml")
def _infer_ml(config, ctype, matrix):
    settings = search.SearchSettings(categories=config.ml.categories, conditioned=config.ml.conditioned)
    return search.ml_search(
        matrix,
        config.ml.n_random,
        config.ml.n_parsimony,
        seed=derive_seed(config.seed, f"ml:{ctype}"),
        settings=settings,
    )


@_stage("infer-mcmc")
def _infer_mcmc(config, ctype, matrix):
    return mcmc.mcmc_run(matrix, config.mcmc.to_config(derive_seed(config.seed, f"mcmc:{ctype}")))


@_stage("gqd")
def _gqd(tree, gold):
    return evaluation.gqd(tree, gold)


@_stage("gqd")
def _gqd_median(trees, gold):
    return evaluation.posterior_gqd_median(trees, gold)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def run_pipeline(config: PipelineConfig) -> list[evaluation.ReportRow]:
    """Run every stage and write all artifacts under ``config.output_dir``.

    Matrices and the report sit at the top level; inference results for each
    character type go to a subdirectory named after it.
    """
    out = Path(config.output_dir)
    wordlist, gold = _parse(config)
    trimmed = _trim(config, _align(config, wordlist))
    found = _patterns(trimmed)
    matrices = _encode(config, wordlist, found)

    _write(out / "alignments.txt", align.write_alignments(trimmed))
    _write(out / "patterns.tsv", patterns.write_patterns(found))
    rows = []
    for ctype, matrix in matrices.items():
        _write(out / f"matrix_{ctype}.nex", encode.write_nexus(matrix))
        rows.append(evaluation.ReportRow(config.dataset, ctype, "nchar", matrix.nchar))
        if config.inference in ("ml", "both"):
            result = _infer_ml(config, ctype, matrix)
            _write(out / ctype / "ml_best.nwk", write_newick(result.tree) + "\n")
            distance = _gqd(result.tree, gold)
            rows += [
                evaluation.ReportRow(config.dataset, ctype, "ml_gqd", distance.distance),
                evaluation.ReportRow(config.dataset, ctype, "ml_loglik", result.loglik),
                evaluation.ReportRow(config.dataset, ctype, "ml_alpha", result.gamma.alpha),
            ]
            log.info("%s ML: logL %.3f, GQD %.4f", ctype, result.loglik, distance.distance)
        if config.inference in ("mcmc", "both"):
            result = _infer_mcmc(config, ctype, matrix)
            for k, run in enumerate(result.runs, start=1):
                _write(out / ctype / f"mcmc_run{k}.trees", mcmc.write_trees([s.tree for s in run]))
                _write(out / ctype / f"mcmc_run{k}.trace.tsv", mcmc.write_trace(run))
            _write(out / ctype / "mcmc_posterior.trees", mcmc.write_trees(result.posterior_trees))
            if not result.converged:
                log.warning("%s MCMC did not reach the ASDSF target (%.4f)", ctype, result.asdsf)
            alphas = [s.alpha for run in result.retained(config.mcmc.burnin_fraction) for s in run]
            rows += [
                evaluation.ReportRow(
                    config.dataset, ctype, "mcmc_gqd_median", _gqd_median(result.posterior_trees, gold)
                ),
                evaluation.ReportRow(config.dataset, ctype, "mcmc_alpha_median", float(np.median(alphas))),
                evaluation.ReportRow(config.dataset, ctype, "mcmc_asdsf", result.asdsf),
                evaluation.ReportRow(
                    config.dataset, ctype, "mcmc_converged", "yes" if result.converged else "no"
                ),
                evaluation.ReportRow(config.dataset, ctype, "mcmc_generations", result.generations),
            ]
    _write(out / "report.tsv", evaluation.write_report(rows))
    return rows


# --- subcommands --------------------------------------------------------------------


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit(text: str, output) -> None:
    if output:
        _write(Path(output), text)
    else:
        sys.stdout.write(text)


def cmd_summarize(args):
    stats = corpus.summarize(corpus.read_wordlist(args.wordlist))
    lines = ["statistic\tvalue"] + [f"{k}\t{v}" for k, v in asdict(stats).items()]
    _emit("\n".join(lines) + "\n", args.output)


def cmd_align(args):
    scheme = align.ScoringScheme(args.match, args.mismatch, args.gap)
    alignments = align.align_wordlist(corpus.read_wordlist(args.wordlist), scheme)
    _emit(align.write_alignments(alignments), args.output)


def cmd_trim(args):
    trimmed = [align.trim_alignment(a, args.tau) for a in align.read_alignments(_read(args.alignments))]
    _emit(align.write_alignments(trimmed), args.output)


def cmd_patterns(args):
    found = patterns.detect_patterns(patterns.extract_sites(align.read_alignments(_read(args.alignments))))
    _emit(patterns.write_patterns(found), args.output)


def cmd_encode(args):
    wordlist = corpus.read_wordlist(args.wordlist)
    matrices = {}
    if args.type in ("cognates", "combined"):
        matrices["cognates"] = encode.encode_cognates(wordlist)
    if args.type in ("patterns", "combined"):
        if not args.alignments:
            raise LexphyloError("--alignments is required for pattern characters")
        # the pattern dump carries no concept information, so patterns are rebuilt
        # from the (trimmed) alignments; detection is deterministic
        sites = patterns.extract_sites(align.read_alignments(_read(args.alignments)))
        matrices["patterns"] = encode.encode_patterns(patterns.detect_patterns(sites), wordlist)
    if args.type == "combined":
        matrix = encode.concatenate(matrices["cognates"], matrices["patterns"])
    else:
        matrix = matrices[args.type]
    _emit(encode.write_nexus(matrix), args.output)


def cmd_infer_ml(args):
    matrix = encode.read_nexus(_read(args.matrix))
    settings = search.SearchSettings(categories=args.categories, conditioned=args.conditioned)
    result = search.ml_search(matrix, args.n_random, args.n_parsimony, seed=args.seed, settings=settings)
    log.info("best logL %.6f, alpha %.4f, pi1 %.4f", result.loglik, result.gamma.alpha, result.model.pi1)
    _emit(write_newick(result.tree) + "\n", args.output)


def cmd_infer_mcmc(args):
    matrix = encode.read_nexus(_read(args.matrix))
    config = mcmc.McmcConfig(
        generations_max=args.generations_max,
        sample_every=args.sample_every,
        burnin_fraction=args.burnin_fraction,
        asdsf_target=args.asdsf_target,
        runs=args.runs,
        alpha_prior=args.alpha_prior,
        seed=args.seed,
    )
    result = mcmc.mcmc_run(matrix, config)
    out = Path(args.output_dir)
    for k, run in enumerate(result.runs, start=1):
        _write(out / f"mcmc_run{k}.trees", mcmc.write_trees([s.tree for s in run]))
        _write(out / f"mcmc_run{k}.trace.tsv", mcmc.write_trace(run))
    _write(out / "mcmc_posterior.trees", mcmc.write_trees(result.posterior_trees))
    status = "converged" if result.converged else "not converged"
    print(f"{status}\tgenerations={result.generations}\tasdsf={result.asdsf:.6f}")


def cmd_gqd(args):
    gold = parse_newick(_read(args.gold))
    trees = parse_newick_many(_read(args.inferred))
    if len(trees) == 1:
        r = evaluation.gqd(trees[0], gold)
        print(f"{r.distance:.6f}\tbutterflies={r.butterflies_gold}\tdiscordant={r.discordant}")
    else:
        print(f"{evaluation.posterior_gqd_median(trees, gold):.6f}\tsamples={len(trees)}")


def cmd_simulate(args):
    tree = parse_newick(_read(args.tree))
    gamma = GammaRates.uniform() if args.alpha is None else discretize_gamma(args.alpha, args.categories)
    matrix = simulate_matrix(
        tree, BinaryCTMC.from_pi1(args.pi1), gamma, args.chars, args.missing, seed=args.seed
    )
    _emit(encode.write_nexus(matrix), args.output)


def cmd_pipeline(args):
    config = PipelineConfig.load(args.config)
    overrides = {
        "seed": args.seed,
        "output_dir": args.output_dir,
        "tau": args.tau,
        "inference": args.inference,
        "character_types": args.character_types,
    }
    data = {k: v for k, v in asdict(config).items()}
    data.update({k: v for k, v in overrides.items() if v is not None})
    config = PipelineConfig(**data)
    rows = run_pipeline(config)
    sys.stdout.write(evaluation.write_report(rows))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lexphylo", description="Lexical phylogenetics from cognate-coded wordlists.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("summarize", help="wordlist statistics")
    p.add_argument("wordlist")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("align", help="align every cognate set")
    p.add_argument("wordlist")
    p.add_argument("--match", type=float, default=1.0)
    p.add_argument("--mismatch", type=float, default=-1.0)
    p.add_argument("--gap", type=float, default=-1.0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("trim", help="drop gap-heavy alignment columns")
    p.add_argument("alignments")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_trim)

    p = sub.add_parser("patterns", help="detect correspondence patterns")
    p.add_argument("alignments")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_patterns)

    p = sub.add_parser("encode", help="binary matrix as Nexus")
    p.add_argument("wordlist")
    p.add_argument("--type", choices=CHARACTER_TYPES, default="cognates")
    p.add_argument("--alignments", help="trimmed alignment dump (needed for pattern characters)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("infer-ml", help="maximum-likelihood tree search")
    p.add_argument("matrix")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-random", type=int, default=10)
    p.add_argument("--n-parsimony", type=int, default=10)
    p.add_argument("--categories", type=int, default=4)
    p.add_argument("--conditioned", action="store_true", help="condition on variable characters")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_infer_ml)

    p = sub.add_parser("infer-mcmc", help="strict-clock Bayesian MCMC")
    p.add_argument("matrix")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--generations-max", type=int, default=1_000_000)
    p.add_argument("--sample-every", type=int, default=1000)
    p.add_argument("--burnin-fraction", type=float, default=0.25)
    p.add_argument("--asdsf-target", type=float, default=0.01)
    p.add_argument("--runs", type=int, default=2)
    p.add_argument("--alpha-prior", choices=("uniform", "exponential"), default="uniform")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_infer_mcmc)

    p = sub.add_parser("gqd", help="generalized quartet distance to a gold tree")
    p.add_argument("inferred", help="Newick file; several trees give the posterior median")
    p.add_argument("gold")
    p.set_defaults(func=cmd_gqd)

    p = sub.add_parser("simulate", help="simulate a binary matrix on a tree")
    p.add_argument("tree")
    p.add_argument("--chars", type=int, default=1000)
    p.add_argument("--alpha", type=float, help="Gamma shape (omit for equal rates)")
    p.add_argument("--categories", type=int, default=4)
    p.add_argument("--pi1", type=float, default=0.5)
    p.add_argument("--missing", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", help="run the whole workflow from a JSON config")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--tau", type=float)
    p.add_argument("--inference", choices=INFERENCE)
    p.add_argument("--character-types", nargs="+", choices=CHARACTER_TYPES)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc.cause}", file=sys.stderr)
        return 2
    except (LexphyloError, ValueError, OSError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
