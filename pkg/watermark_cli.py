"""
Command Line for the Mesh Watermarking Toolkit
Embed, attack and extract watermarks; run sweeps, capacity grids, code generation and survival studies
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from experiments import (DEFAULT_ALPHABET_BITS, DEFAULT_CAPACITY_P_D, DEFAULT_FACE_FRACTIONS, DEFAULT_P_D,
                         capacity_grid, region_study, run_sweep, survival_curve)
from ldpc import CODE_PRESETS, LdpcCode, construct_code, load_code, preset_code, write_alist
from mesh_attacks import SurvivalMap, region_delete, simplify_mesh
from mesh_core import load_obj, save_obj
from mesh_library import SAMPLE_MESHES, build_sample
from report_generator import RANKING_FIELDS, ReportGenerator
from runlength_code import RunAlphabet
from vertex_stability import stability_rank
from watermark_config import WatermarkConfig, load_config
from watermark_errors import EXIT_FAILURE, EXIT_NOT_CONVERGED, EXIT_OK, ConfigError, WatermarkError
from watermark_pipeline import WatermarkPipeline, load_selection, save_selection

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _bits(text: str) -> np.ndarray:
    text = "".join(text.split())
    if any(c not in "01" for c in text):
        raise argparse.ArgumentTypeError("payload must be a string of 0 and 1")
    return np.array([int(c) for c in text], dtype=np.int8)


def _floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected name=value")
    name, value = text.split("=", 1)
    for parse in (int, float):
        try:
            return name, parse(value)
        except ValueError:
            pass
    return name, value


def _resolve_code(spec: Optional[str], config: WatermarkConfig, seed: int = 0) -> LdpcCode:
    """A preset name or an alist path; falls back to the config's code key"""
    spec = spec or config.code
    if not spec:
        raise ConfigError("no code given; pass --code or set code in the config file")
    if spec in CODE_PRESETS:
        return preset_code(spec, seed)
    return load_code(spec)


def _emit(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")
        logger.info("wrote report %s", path)


def _payload(args) -> np.ndarray:
    if args.payload_file is None:
        return args.payload if args.payload is not None else np.empty(0, dtype=np.int8)
    try:
        return _bits(Path(args.payload_file).read_text(encoding="ascii"))
    except (argparse.ArgumentTypeError, UnicodeDecodeError) as error:
        raise ConfigError(f"payload file {args.payload_file}: {error}") from None


def _config(args) -> WatermarkConfig:
    config = load_config(getattr(args, "config", None))
    if getattr(args, "key", None) is not None:
        config = config.with_overrides(key=args.key)
    return config


def cmd_embed(args) -> int:
    config = _config(args)
    pipeline = WatermarkPipeline(config, _resolve_code(args.code, config))
    result = pipeline.embed(load_obj(args.mesh), _payload(args))
    save_obj(result.marked, args.output)
    if args.selection_out:
        save_selection(result.selection, args.selection_out)
    reports = ReportGenerator(config_text=config.to_text())
    _emit(reports.generate_summary_report("EMBEDDING REPORT", result.summary()), args.report)
    return EXIT_OK


def cmd_extract(args) -> int:
    config = _config(args)
    pipeline = WatermarkPipeline(config, _resolve_code(args.code, config))
    selection = load_selection(args.selection) if args.selection else None
    survival = None
    if args.survival_map:
        if selection is None:
            raise ConfigError("--survival-map needs the embedding --selection")
        survival = SurvivalMap.load_csv(args.survival_map)
    result = pipeline.extract(load_obj(args.mesh), selection, survival)
    bits = "".join(str(int(b)) for b in result.payload) + "\n"
    if args.output:
        Path(args.output).write_text(bits, encoding="ascii")
    else:
        sys.stdout.write(bits)
    reports = ReportGenerator(config_text=config.to_text())
    summary = dict(result.summary(), mode="blind" if selection is None else "oracle")
    if args.report:
        _emit(reports.generate_summary_report("EXTRACTION REPORT", summary), args.report)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_attack(args) -> int:
    config = _config(args)
    mesh = load_obj(args.mesh)
    if args.simplify is not None:
        if not 0.0 < args.simplify <= 1.0:
            raise ConfigError(f"--simplify must lie in (0, 1], got {args.simplify}")
        attacked, survival = simplify_mesh(mesh, args.simplify, args.seed)
        kind = f"simplify {args.simplify}"
    else:
        center, hops = args.region
        attacked, survival = region_delete(mesh, center, hops)
        kind = f"region {center} {hops}"
    save_obj(attacked, args.output)
    survival.save_csv(args.survival_map)
    summary = {
        "attack": kind, "seed": args.seed,
        "vertices_before": mesh.vertex_count, "vertices_after": attacked.vertex_count,
        "faces_before": mesh.face_count, "faces_after": attacked.face_count,
        "achieved_fraction": survival.achieved_fraction, "deleted_vertices": survival.deleted_count,
    }
    reports = ReportGenerator(config_text=config.to_text())
    _emit(reports.generate_summary_report("ATTACK REPORT", summary), args.report)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _config(args)
    code = _resolve_code(args.code, config, args.seed)
    alphabet = RunAlphabet.default(args.bits_per_symbol, args.s_d)
    report = run_sweep(code, alphabet, args.p_d, args.frames, args.seed, args.max_iter, args.workers)
    reports = ReportGenerator(config_text=config.to_text())
    if args.csv:
        reports.generate_sweep_report(report, "csv", args.csv)
    if args.chart:
        reports.create_error_rate_chart(report, args.chart)
    _emit(reports.generate_sweep_report(report, "text"), args.report)
    return EXIT_OK


def cmd_capacity(args) -> int:
    config = _config(args)
    rows = capacity_grid(args.alphabet_bits, args.p_d, args.s_d)
    reports = ReportGenerator(config_text=config.to_text())
    if args.csv:
        reports.generate_capacity_report(rows, "csv", args.csv)
    if args.chart:
        reports.create_capacity_chart(rows, args.chart)
    _emit(reports.generate_capacity_report(rows, "text"), args.report)
    return EXIT_OK


def cmd_codegen(args) -> int:
    config = _config(args)
    if args.preset:
        code = preset_code(args.preset, args.seed)
    elif None in (args.q, args.mu, args.eta):
        raise ConfigError("codegen needs --preset or all of --q, --mu and --eta")
    else:
        code = construct_code(args.q, args.mu, args.eta, args.seed)
    write_alist(code.H, args.output)
    reports = ReportGenerator(config_text=config.to_text())
    _emit(reports.generate_summary_report("CODE PARAMETERS", code.summary()), args.report)
    return EXIT_OK


def cmd_sample(args) -> int:
    mesh = build_sample(args.name, **dict(args.param))
    save_obj(mesh, args.output)
    logger.info("wrote %s with %d vertices to %s", args.name, mesh.vertex_count, args.output)
    return EXIT_OK


def cmd_rank(args) -> int:
    config = _config(args)
    ranking = stability_rank(load_obj(args.mesh), config.stability_config())
    rows = ranking.rows()[:args.top] if args.top else ranking.rows()
    ReportGenerator().write_csv(rows, RANKING_FIELDS, args.output)
    return EXIT_OK


def cmd_survival(args) -> int:
    config = _config(args)
    mesh = load_obj(args.mesh)
    reports = ReportGenerator(config_text=config.to_text())
    rows = survival_curve(mesh, args.count, args.fractions, args.seeds, config.stability_config())
    text = reports.generate_survival_report(rows, "text")
    if args.csv:
        reports.generate_survival_report(rows, "csv", args.csv)
    if args.chart:
        reports.create_survival_chart(rows, args.chart)
    if args.coverage > 0:
        regions = region_study(mesh, args.count, args.coverage, args.seeds, config.stability_config())
        text += "\n" + reports.generate_region_report(regions, "text")
        if args.region_csv:
            reports.generate_region_report(regions, "csv", args.region_csv)
    _emit(text, args.report)
    return EXIT_OK


def _run(args) -> int:
    """Run a command; library argument checks failing on command line values become config errors"""
    try:
        return args.func(args)
    except WatermarkError:
        raise
    except ValueError as error:
        raise ConfigError(f"invalid {args.command} arguments: {error}") from error


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshmark", description="LDPC-coded sparse QIM watermarking of 3D meshes")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("-v", "--verbose", action="store_true", help="shortcut for --log-level INFO")
    commands = parser.add_subparsers(dest="command", required=True)

    def report_option(sub):
        sub.add_argument("--report", type=Path, help="write the text report here instead of stdout")

    embed = commands.add_parser("embed", help="watermark a mesh")
    embed.add_argument("mesh")
    embed.add_argument("-o", "--output", required=True, help="watermarked OBJ")
    payload = embed.add_mutually_exclusive_group()
    payload.add_argument("--payload", type=_bits, help="payload bits, e.g. 0110")
    payload.add_argument("--payload-file", help="text file holding the payload bits")
    embed.add_argument("--key", type=int)
    embed.add_argument("--config")
    embed.add_argument("--code", help=f"alist file or preset ({', '.join(CODE_PRESETS)})")
    embed.add_argument("--selection-out", help="CSV of the marked vertices in embedding order")
    report_option(embed)
    embed.set_defaults(func=cmd_embed)

    extract = commands.add_parser("extract", help="recover a payload")
    extract.add_argument("mesh")
    extract.add_argument("--key", type=int)
    extract.add_argument("--config")
    extract.add_argument("--code")
    extract.add_argument("--selection", help="embedding selection CSV (oracle alignment)")
    extract.add_argument("--survival-map", help="survival map CSV of the attack (oracle alignment)")
    extract.add_argument("-o", "--output", help="write the payload bits here instead of stdout")
    report_option(extract)
    extract.set_defaults(func=cmd_extract)

    attack = commands.add_parser("attack", help="simplify a mesh or delete a region")
    attack.add_argument("mesh")
    kind = attack.add_mutually_exclusive_group(required=True)
    kind.add_argument("--simplify", type=float, metavar="FRACTION", help="fraction of faces to keep")
    kind.add_argument("--region", type=int, nargs=2, metavar=("CENTER", "HOPS"))
    attack.add_argument("--seed", type=int, default=0)
    attack.add_argument("--config")
    attack.add_argument("-o", "--output", required=True)
    attack.add_argument("--survival-map", required=True, help="CSV of original_index,survived,new_index")
    report_option(attack)
    attack.set_defaults(func=cmd_attack)

    sweep = commands.add_parser("sweep", help="coded BER/FER over the deletion channel")
    sweep.add_argument("--code", required=True)
    sweep.add_argument("--config")
    sweep.add_argument("--bits-per-symbol", type=int, default=1)
    sweep.add_argument("--s-d", type=int, default=1)
    sweep.add_argument("--p-d", type=_floats, default=list(DEFAULT_P_D))
    sweep.add_argument("--frames", type=int, default=1000)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--max-iter", type=int, default=50)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--csv")
    sweep.add_argument("--chart")
    report_option(sweep)
    sweep.set_defaults(func=cmd_sweep)

    capacity = commands.add_parser("capacity", help="capacity per unit cost grid")
    capacity.add_argument("--alphabet-bits", type=_ints, default=list(DEFAULT_ALPHABET_BITS))
    capacity.add_argument("--p-d", type=_floats, default=list(DEFAULT_CAPACITY_P_D))
    capacity.add_argument("--s-d", type=int, default=1)
    capacity.add_argument("--config")
    capacity.add_argument("--csv")
    capacity.add_argument("--chart")
    report_option(capacity)
    capacity.set_defaults(func=cmd_capacity)

    codegen = commands.add_parser("codegen", help="construct a Latin-square LDPC code")
    codegen.add_argument("--preset", choices=list(CODE_PRESETS))
    codegen.add_argument("--q", type=int)
    codegen.add_argument("--mu", type=int)
    codegen.add_argument("--eta", type=int)
    codegen.add_argument("--seed", type=int, default=0)
    codegen.add_argument("--config")
    codegen.add_argument("-o", "--output", required=True, help="alist file")
    report_option(codegen)
    codegen.set_defaults(func=cmd_codegen)

    sample = commands.add_parser("sample", help="write a synthetic mesh")
    sample.add_argument("name", choices=sorted(SAMPLE_MESHES))
    sample.add_argument("-o", "--output", required=True)
    sample.add_argument("--param", type=_param, action="append", default=[], help="factory option name=value")
    sample.set_defaults(func=cmd_sample)

    rank = commands.add_parser("rank", help="export the stability ranking")
    rank.add_argument("mesh")
    rank.add_argument("--config")
    rank.add_argument("--top", type=int, default=0)
    rank.add_argument("-o", "--output", required=True)
    rank.set_defaults(func=cmd_rank)

    survival = commands.add_parser("survival", help="deletion of ranked against random vertices")
    survival.add_argument("mesh")
    survival.add_argument("--config")
    survival.add_argument("--count", type=int, default=1000)
    survival.add_argument("--fractions", type=_floats, default=list(DEFAULT_FACE_FRACTIONS))
    survival.add_argument("--seeds", type=_ints, default=[0])
    survival.add_argument("--coverage", type=float, default=0.2, help="region study coverage, 0 to skip")
    survival.add_argument("--csv")
    survival.add_argument("--region-csv")
    survival.add_argument("--chart")
    report_option(survival)
    survival.set_defaults(func=cmd_survival)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the command line"""
    args = build_parser().parse_args(argv)
    level = "INFO" if args.verbose and args.log_level == "WARNING" else args.log_level
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, stream=sys.stderr)
    try:
        return _run(args)
    except WatermarkError as error:
        logger.error("%s", error)
        logger.debug("traceback", exc_info=True)
        return error.exit_code
    except OSError as error:
        logger.error("%s", error)
        return EXIT_FAILURE
    except Exception:
        logger.exception("unexpected failure in %s", args.command)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
