#!/usr/bin/env python3
"""One-minute end-to-end sanity run at toy scale.

Runs a shrunken honest baseline and a shrunken coordinated attack through
the full pipeline (population, graph, ratings, fit, filter, metrics) and
prints the headline numbers.  Exit code 0 means every stage ran and the
attack suppressed more targeted notes than the honest run did.
"""

import sys
import time
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from notesim.experiments import load_preset, run_replicate


def shrink(cfg, n_raters=800, n_notes=600):
    population = replace(cfg.population, n_raters=n_raters, n_notes=n_notes)
    return replace(cfg, population=population, n_replicates=1)


def show(tag, res):
    o, t = res.overall, res.targeted
    print(f"{tag}: {res.n_raters} raters x {res.n_notes} notes, "
          f"{res.n_removed} raters filtered, "
          f"mix H/S/N = {res.rating_mix[0]:.2f}/{res.rating_mix[1]:.2f}/"
          f"{res.rating_mix[2]:.2f}")
    print(f"  overall suppression={o.suppression:.3f} "
          f"pollution={o.pollution:.3f} publication={o.publication_rate:.3f}")
    print(f"  targeted suppression={t.suppression:.3f} "
          f"publication={t.publication_rate:.3f}")


def main() -> int:
    t0 = time.perf_counter()
    honest = run_replicate(shrink(load_preset("baseline-main").scenario), 0)
    attack = run_replicate(shrink(load_preset("table1").scenario), 0)
    for res in (honest, attack):
        if res.error is not None:
            print(f"replicate failed: {res.error}", file=sys.stderr)
            return 1
    show("honest", honest)
    show("coordinated 25%", attack)
    print(f"total {time.perf_counter() - t0:.0f}s")
    ok = attack.targeted.suppression > honest.targeted.suppression
    print("smoke OK" if ok else "smoke FAILED: attack did not suppress")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
