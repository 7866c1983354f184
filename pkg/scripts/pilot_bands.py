"""Calibrate the acceptance bands for the SLND and modulus criteria.

The pilot runs four independent blocks with the criterion's own sizes (four
times the trials or replicates in total) on seeds disjoint from the acceptance
seeds. Each band is ``[min / 2, 2 max]`` over the pilot statistics.

    python3 scripts/pilot_bands.py [--config-dir DIR] [--threads N]
"""

import argparse

import numpy as np

from twopoint.acceptance import default_config_dir
from twopoint.covariance import make_covariance
from twopoint.fieldsim import modulus_experiment
from twopoint.io import read_json, write_json
from twopoint.slnd import slnd_experiment
from twopoint.spaces import parse_space
from twopoint.spectra import powerlaw_spectrum, sine_power_spectrum

BLOCKS = 4
PILOT_OFFSET = 1000


def spectrum(name, space, nu):
    return powerlaw_spectrum(nu, 128) if name == "powerlaw" else sine_power_spectrum(space, nu, 128)


def band(values):
    return [float(np.min(values)) / 2, 2 * float(np.max(values))]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config-dir", default=str(default_config_dir()))
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()
    d = args.config_dir

    c10 = read_json(f"{d}/c10.json")
    space = parse_space(c10["space"])
    slnd, slnd_raw = {}, {}
    for name in c10["spectra"]:
        model = make_covariance(space, spectrum(name, space, c10["nu"]), tail_tol=c10["tail_tol"])
        g = [slnd_experiment(model, c10["nu"], c10["trials"], c10["n_max"], c10["seed"] + PILOT_OFFSET + k,
                             threads=args.threads).gamma_hat for k in range(BLOCKS)]
        slnd[name], slnd_raw[name] = band(g), g
        print(f"slnd {name}: pilot gamma_hat {np.round(g, 4)} -> band {np.round(slnd[name], 4)}")

    c12 = read_json(f"{d}/c12.json")
    space = parse_space(c12["space"])
    model = make_covariance(space, sine_power_spectrum(space, c12["nu"], 128), tail_tol=c12["tail_tol"])
    sups = []
    for k in range(BLOCKS):
        rep = modulus_experiment(model, c12["nu"], c12["levels"], c12["replicates"],
                                 c12["seed"] + PILOT_OFFSET + k, threads=args.threads)
        sups.extend(rep.sup_ratio[rep.nonempty].tolist())
        print(f"modulus block {k}: sup ratios {np.round(rep.sup_ratio, 3)} slope {rep.slope:.3f}")
    modulus = {"sine_power": band(sups)}
    print(f"modulus band {np.round(modulus['sine_power'], 3)}")

    write_json(f"{d}/bands.json", {
        "slnd": slnd, "modulus": modulus,
        "pilot": {"blocks": BLOCKS, "seed_offset": PILOT_OFFSET, "rule": "[min/2, 2 max] over pilot statistics",
                  "slnd_gamma_hat": slnd_raw, "modulus_sup_ratio": sups},
    })


if __name__ == "__main__":
    main()
