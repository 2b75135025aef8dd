import json
import sys
from pathlib import Path

import yaml
from absl import app, flags, logging
from dotenv import load_dotenv

from helmkit_inversion import config_utils
from helmkit_inversion.errors import ConfigError, HelmkitError
from helmkit_inversion.pipeline import commands
from helmkit_inversion.reconstruct.objectives import ObjectiveVariant

FLAGS = flags.FLAGS

COMMANDS = ("gen", "dtilde", "beta", "reconstruct", "render")
MISSING_FILE_EXIT_CODE = 4

flags.DEFINE_string("config", None, "Path to the run config (YAML or JSON)")
flags.DEFINE_string("out", None, "Run directory (default: config output_dir or $HELMKIT_OUTPUT_DIR)")
flags.DEFINE_float("delta", None, "Relative noise level, delta = value * ||V||_F (overrides config)")
flags.DEFINE_integer("d", None, "Inertia budget d(qtilde) (overrides config)")
flags.DEFINE_enum(
    "variant", None, [v.value for v in ObjectiveVariant], "Reconstruction objective"
)
flags.DEFINE_float("alpha", None, "Contrast of the negative-count field")
flags.DEFINE_integer("resolution", None, "Raster size of the render command")
flags.DEFINE_integer("seed", None, "Noise seed (overrides config)")
flags.DEFINE_list("r0", None, "Comma-separated comparison radii for dtilde")
flags.DEFINE_float("mesh_h", None, "Mesh size for dtilde")
flags.DEFINE_float("k", None, "Wavenumber for dtilde")
flags.DEFINE_float("qmax", None, "Comparison index inside the disk for dtilde")
flags.DEFINE_float("q0", None, "Background index for dtilde")
flags.DEFINE_string("field", None, "Per-pixel CSV to render")
flags.DEFINE_string("mesh", None, "Mesh JSON matching the field")
flags.DEFINE_string("column", None, "Column of the field CSV to render")

load_dotenv()


def _load_run_config(required: bool = True):
    if not FLAGS.config:
        if required:
            raise ConfigError("--config is required for this command")
        return None
    try:
        raw = config_utils.load_config(FLAGS.config)
    except FileNotFoundError as e:
        raise ConfigError(str(e))
    except yaml.YAMLError as e:
        raise ConfigError(str(e))
    return config_utils.parse_run_config(raw)


def _run_dir(config=None) -> Path:
    if config is not None:
        return Path(config.resolve_output_dir(FLAGS.out))
    if FLAGS.out:
        return Path(FLAGS.out)
    config = _load_run_config(required=False)
    if config is None:
        raise ConfigError("Pass --out or --config to locate the run directory")
    return Path(config.resolve_output_dir())


def _gen():
    config = _load_run_config()
    commands.cmd_gen(config, _run_dir(config), noise_level=FLAGS.delta, seed=FLAGS.seed)


def _dtilde():
    config = _load_run_config(required=False)
    sc = config.scenario if config else None
    k = FLAGS.k if FLAGS.k is not None else (sc.k if sc else None)
    qmax = FLAGS.qmax if FLAGS.qmax is not None else (sc.q_inclusion if sc else None)
    q0 = FLAGS.q0 if FLAGS.q0 is not None else (sc.q0 if sc else 1.0)
    if k is None or qmax is None:
        raise ConfigError("dtilde needs --k and --qmax (or a --config)")
    r0_list = [float(r) for r in FLAGS.r0] if FLAGS.r0 else (config.r0_values if config else [1.0])
    mesh_h = FLAGS.mesh_h if FLAGS.mesh_h is not None else (config.dtilde_h if config else 0.05)
    out = _run_dir(config) if (config or FLAGS.out) else Path(".")
    table = commands.cmd_dtilde(k, qmax, r0_list, mesh_h, out / commands.DTILDE_CSV, q0=q0)
    for row in table.itertuples(index=False):
        logging.info(f"r0={row.r0:.3f}: d(qtilde)={row.count}")


def _beta():
    commands.cmd_beta(_run_dir(), noise_level=FLAGS.delta, d=FLAGS.d, alpha=FLAGS.alpha)


def _reconstruct():
    report = commands.cmd_reconstruct(
        _run_dir(), variant=FLAGS.variant, noise_level=FLAGS.delta, d=FLAGS.d
    )
    logging.info(f"Support has {report.n_components} component(s)")


def _render():
    if not FLAGS.field or not FLAGS.mesh or not FLAGS.out:
        raise ConfigError("render needs --field, --mesh and --out")
    resolution = FLAGS.resolution if FLAGS.resolution is not None else 256
    commands.cmd_render(FLAGS.field, FLAGS.mesh, FLAGS.out, resolution, FLAGS.column)


_DISPATCH = {
    "gen": _gen,
    "dtilde": _dtilde,
    "beta": _beta,
    "reconstruct": _reconstruct,
    "render": _render,
}


def _fail(name: str, exit_code: int, message: str) -> None:
    logging.error(f"{name}: {message}")
    sys.stderr.write(
        json.dumps({"error": name, "exit_code": exit_code, "message": message}) + "\n"
    )
    sys.exit(exit_code)


def main(argv):
    if len(argv) != 2 or argv[1] not in COMMANDS:
        _fail("ConfigError", ConfigError.exit_code, f"Expected one command of {list(COMMANDS)}")

    logging.info("=" * 60)
    logging.info(f"helmkit {argv[1]}")
    logging.info("=" * 60)
    try:
        _DISPATCH[argv[1]]()
    except HelmkitError as e:
        _fail(type(e).__name__, e.exit_code, str(e))
    except FileNotFoundError as e:
        _fail("FileNotFoundError", MISSING_FILE_EXIT_CODE, str(e))


def run():
    app.run(main)


if __name__ == "__main__":
    run()
