import argparse
import logging
import sys
import warnings

from touchdown_lab.annular import AnnularError
from touchdown_lab.composite import ExponentDomainError, InconsistentMatching
from touchdown_lab.config import STAGES, ConfigError, apply_overrides, load_config
from touchdown_lab.diagnostics import NoInteriorMinimum
from touchdown_lab.pipeline import TouchdownOccurred, ValidationFailure, run_pipeline
from touchdown_lab.similarity import PlateauNotReached, SimilarityError
from touchdown_lab.solver import SolverError
from touchdown_lab.touchdown import TouchdownError

logger = logging.getLogger("touchdown_lab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_TOUCHDOWN = 4
EXIT_VALIDATION = 5


def _configure_logging(level: int, suppress_warnings: bool = False) -> None:
    """Configure root logging and route Python warnings through it."""
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)
    if suppress_warnings:
        warnings.filterwarnings("ignore")
    logging.captureWarnings(True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="touchdown-lab",
        description="Radial degenerate Cahn-Hilliard runs, similarity analysis and touchdown asymptotics",
    )
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--n", type=float, help="mobility exponent")
    parser.add_argument("--eps", type=float, help="interface width epsilon")
    parser.add_argument("--grid-N", dest="grid_n", type=int, help="number of grid cells")
    parser.add_argument("--t-end", dest="t_end", type=float, help="final time of the PDE run")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--stage", choices=STAGES, help="run a single stage instead of the configured chain")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="log solver details")
    verbosity.add_argument("--quiet", action="store_true", help="warnings and errors only")
    return parser


# Error handling wrapper
def handle_run(args) -> int:
    try:
        config = apply_overrides(load_config(args.config), n=args.n, eps=args.eps, grid_cells=args.grid_n,
                                 t_end=args.t_end, out=args.out, stage=args.stage)
        summary = run_pipeline(config)
        logger.info("finished stages %s in %s", ", ".join(summary), config.outputs.directory)
        return EXIT_OK
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except TouchdownOccurred as e:
        logger.error("%s; outputs kept in %s", e, e.directory)
        return EXIT_TOUCHDOWN
    except ValidationFailure as e:
        for failure in e.failures:
            logger.error("validation failed: %s", failure)
        return EXIT_VALIDATION
    except (InconsistentMatching, PlateauNotReached) as e:
        logger.error("validation failed: %s", e)
        return EXIT_VALIDATION
    except (SolverError, AnnularError, TouchdownError, SimilarityError, NoInteriorMinimum,
            ExponentDomainError) as e:
        logger.error("solve failed: %s", e)
        return EXIT_SOLVER
    except FileNotFoundError as e:
        logger.error("missing input artifact: %s (run the earlier stages first)", e.filename)
        return EXIT_CONFIG


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    else:
        level = logging.INFO
    _configure_logging(level, suppress_warnings=args.quiet)
    return handle_run(args)


if __name__ == "__main__":
    sys.exit(main())
