#!/usr/bin/env python3
"""
GEODESIC LAB - Closed geodesics of SL2(Z[i]) from Hurwitz continued fractions

This script drives the library through reproducible experiments:

1. partition  - Markov partition of radius R and its transition matrix
2. delta      - growth exponent delta_R from the pressure equation
3. enumerate  - closed geodesics in a norm ball, with congruence statistics
4. charsums   - Kloosterman-type character sums against their bounds
5. sieve      - sifting set and the sieve ledger |U_q| = beta(q)|Pi| + r(q)
6. harvest    - traces with square-free discriminant and their multiplicities

Every run writes its outputs and a manifest.json with the SHA-256 of each file.

Usage:
    python geodesic_lab.py partition --radius 4
    python geodesic_lab.py enumerate --radius 4 --ball 16 --mod 1+i
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from geolab.charsums import SUM_TOL, all_characters, charsum_margins, sl2_charsum_bound, write_margins_csv
from geolab.cli_utils import LabCLI
from geolab.config import RunConfig, build_config
from geolab.congruence import equidist_stats, write_equidist_csv
from geolab.errors import BoundViolationError, CertificationError
from geolab.gaussian import ResidueRing, factor
from geolab.geodesics import (
    Alphabet,
    GeodesicClass,
    enumerate_ball,
    find_collisions,
    word_to_matrix,
    write_geodesics_csv,
)
from geolab.hurwitz import Partition, build_partition
from geolab.sieve import almost_prime_count, build_sifting_set, harvest, sieve_ledger, write_harvest_csv, write_ledger_csv
from geolab.storage import LabStore, file_sha256, write_manifest
from geolab.subshift import TransitionMatrix, build_transitions, check_irreducible_aperiodic
from geolab.thermo import CylinderLevels, pressure_model, solve_delta, write_delta_json, write_pressure_csv

# Load environment variables
load_dotenv()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_BOUND_VIOLATION = 3
EXIT_CERTIFICATION = 4


class GeodesicLabOrchestrator:
    """Runs one lab command in phases, caching intermediate objects and writing a manifest"""

    def __init__(self, command: str, config: RunConfig, quiet: bool = False):
        self.command = command
        self.config = config
        self.cli = LabCLI(quiet=quiet)
        self.store = LabStore(config.cache, verbose=not quiet)

        # Track results for final summary
        self.results: Dict[str, Dict[str, Any]] = {}
        self.outputs: Dict[str, Path] = {}
        self.input_hashes: Dict[str, str] = {}

    def run(self) -> int:
        """Execute the command and return its exit code"""
        self.cli.print_banner(self.command)
        self.config.out_dir.mkdir(parents=True, exist_ok=True)
        handler = getattr(self, f"_run_{self.command}")
        violation: Optional[BoundViolationError] = None
        try:
            handler()
        except BoundViolationError as e:
            violation = e
            self.results["Bound check"] = {"success": False, "error": f"{e} ({e.violations} violations)"}
        self._write_manifest()
        self.cli.print_summary_table(self.command, self.results)
        if violation is not None:
            raise violation
        return EXIT_OK

    # ------------------------------------------------------------------
    # cached building blocks

    def _partition(self, radius: float) -> Partition:
        params = {"radius": radius}
        cached = self.store.lookup("partition", params)
        if cached is not None:
            partition = Partition.from_json(cached)
        else:
            with self.cli.status(f"Building the radius-{radius} partition"):
                partition = build_partition(radius)
        data = partition.to_json()
        self.input_hashes[f"partition-R{radius:g}"] = self.store.remember("partition", params, data)
        return partition

    def _transitions(self, partition: Partition, certify: Optional[bool] = None) -> TransitionMatrix:
        params = {"radius": partition.radius, "certify": certify}
        cached = self.store.lookup("transitions", params)
        if cached is not None:
            transitions = TransitionMatrix.from_edges(cached["size"], cached["edges"])
        else:
            with self.cli.status("Building the transition matrix"):
                transitions = build_transitions(partition, certify=certify)
        xs, ys = transitions.bits.nonzero()
        data = {"size": transitions.size, "edges": [[int(x), int(y)] for x, y in zip(xs, ys)]}
        self.input_hashes[f"transitions-R{partition.radius:g}"] = self.store.remember("transitions", params, data)
        return transitions

    def _geodesics(self, alphabet: Alphabet, transitions: TransitionMatrix, X: float, aperiodic_only: bool) -> List[GeodesicClass]:
        params = {"radius": alphabet.partition.radius, "ball": X, "aperiodic_only": aperiodic_only}
        cached = self.store.lookup("geodesics", params)
        if cached is not None:
            words = [tuple(word) for word in cached["words"]]
            classes = [GeodesicClass.from_word(word, word_to_matrix(alphabet, word)) for word in words]
        else:
            with self.cli.status(f"Enumerating closed geodesics with ||M|| < {X:g}"):
                classes = enumerate_ball(alphabet, transitions, X, aperiodic_only=aperiodic_only, workers=self.config.workers)
        data = {"words": [list(g.word) for g in classes]}
        self.input_hashes["geodesics"] = self.store.remember("geodesics", params, data)
        return classes

    def _emit(self, name: str, path: Path):
        self.outputs[name] = path
        self.cli.print_file(str(path), file_sha256(path))

    # ------------------------------------------------------------------
    # commands

    def _run_partition(self):
        cfg = self.config
        self.cli.print_phase_header(1, "Markov Partition", f"Parts of the radius-{cfg.radius:g} partition and their images")

        self.cli.print_step(1, "Building the partition", "in_progress")
        partition = self._partition(cfg.radius)
        self.cli.print_step(1, f"Partition has {len(partition)} parts", "completed")

        self.cli.print_step(2, "Building and certifying the transition matrix", "in_progress")
        transitions = self._transitions(partition, cfg.certify)
        report = check_irreducible_aperiodic(transitions)
        self.cli.print_step(2, f"Transition matrix has {transitions.nnz} ones", "completed")

        partition_path = cfg.out_dir / "partition.json"
        partition_path.write_text(partition.dumps() + "\n")
        self._emit("partition.json", partition_path)
        transitions_path = cfg.out_dir / "transitions.csv"
        transitions.write_csv(transitions_path)
        self._emit("transitions.csv", transitions_path)
        summary = {
            "radius": cfg.radius,
            "parts": len(partition),
            "transitions": transitions.nnz,
            "irreducible": report.irreducible,
            "aperiodic": report.period == 1,
            "period": report.period,
            "primitivity_index": report.primitivity_index,
        }
        summary_path = cfg.out_dir / "summary.json"
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        self._emit("summary.json", summary_path)

        self.cli.print_table(
            "Subshift summary",
            ["R", "parts", "ones", "irreducible", "period", "primitivity index"],
            [[f"{cfg.radius:g}", len(partition), transitions.nnz, report.irreducible, report.period, report.primitivity_index]],
        )
        self.results["Partition"] = {"success": True, "details": f"{len(partition)} parts, {transitions.nnz} transitions"}
        self.results["Subshift"] = {
            "success": report.irreducible and report.period == 1,
            "details": f"irreducible={report.irreducible}, aperiodic={report.period == 1}, primitivity index={report.primitivity_index}",
            "error": f"irreducible={report.irreducible}, period={report.period}",
        }

    def _run_delta(self):
        cfg = self.config
        self.cli.print_phase_header(1, "Subshift", f"Partition and transitions at R = {cfg.radius:g}")
        partition = self._partition(cfg.radius)
        transitions = self._transitions(partition)
        alphabet = Alphabet(partition)
        self.cli.print_step(1, f"{len(partition)} parts, {transitions.nnz} transitions", "completed")

        self.cli.print_phase_header(2, "Pressure", f"Bracketing delta_R at depths {list(cfg.depths)}")
        self.cli.print_step(2, "Solving P(s) = 0", "in_progress")
        with self.cli.status("Solving the pressure equation"):
            estimate = solve_delta(partition, tol=cfg.tol, depths=cfg.depths, transitions=transitions, alphabet=alphabet)
        self.cli.print_step(2, f"delta in [{estimate.lo:.6f}, {estimate.hi:.6f}] at depth {estimate.depth}", "completed")
        if not estimate.certified:
            self.cli.print_warning(f"Bracket width {estimate.hi - estimate.lo:.2e} exceeds tol {cfg.tol:g}; try a larger --max-depth")

        self.cli.print_step(3, "Sampling the pressure curve", "in_progress")
        levels = CylinderLevels(alphabet, transitions)
        grid = [round(k * cfg.s_step, 12) for k in range(int(round(2.0 / cfg.s_step)) + 1)]
        estimates = []
        for depth in cfg.depths:
            model = pressure_model(alphabet, transitions, depth, levels)
            estimates.extend(model.estimate(s) for s in grid)
        self.cli.print_step(3, f"{len(estimates)} pressure samples", "completed")

        pressure_path = cfg.out_dir / "pressure.csv"
        write_pressure_csv(cfg.radius, estimates, pressure_path)
        self._emit("pressure.csv", pressure_path)
        delta_path = cfg.out_dir / "delta.json"
        write_delta_json(estimate, delta_path)
        self._emit("delta.json", delta_path)

        details = f"delta_R = {estimate.delta:.6f} in [{estimate.lo:.6f}, {estimate.hi:.6f}]"
        if estimate.tail is not None:
            details += f", tail {estimate.tail:.3e}"
        self.results["Delta"] = {"success": True, "details": details}

    def _run_enumerate(self):
        cfg = self.config
        self.cli.print_phase_header(1, "Subshift", f"Partition and transitions at R = {cfg.radius:g}")
        partition = self._partition(cfg.radius)
        transitions = self._transitions(partition)
        alphabet = Alphabet(partition)

        self.cli.print_phase_header(2, "Norm Ball", f"Closed geodesics with ||M|| < {cfg.ball:g}")
        self.cli.print_step(1, "Enumerating canonical cyclic words", "in_progress")
        classes = self._geodesics(alphabet, transitions, cfg.ball, cfg.aperiodic_only)
        self.cli.print_step(1, f"{len(classes)} geodesic classes", "completed")
        collisions = find_collisions(classes)
        if collisions:
            self.cli.print_warning(f"{len(collisions)} trace/form collisions among distinct words")

        geodesics_path = Path(cfg.csv) if cfg.csv else cfg.out_dir / "geodesics.csv"
        write_geodesics_csv(classes, geodesics_path)
        self._emit("geodesics.csv", geodesics_path)
        self.results["Enumeration"] = {"success": True, "details": f"{len(classes)} classes, {len(collisions)} collisions"}

        q = cfg.modulus
        if q is None:
            return
        self.cli.print_phase_header(3, "Congruence", f"Binning the matrices mod {q}")
        report = equidist_stats([g.matrix.to_ints() for g in classes], q, cfg.ball, cfg.radius)
        equidist_path = cfg.out_dir / "equidist.csv"
        write_equidist_csv(report, equidist_path)
        self._emit("equidist.csv", equidist_path)
        self.results["Equidistribution"] = {
            "success": True,
            "details": f"{report.classes_hit}/{report.group_order} classes hit, max rel dev {report.max_rel_dev:.4f}",
        }

    def _run_charsums(self):
        cfg = self.config
        q = cfg.modulus
        ring = ResidueRing(q)
        characters = [chi for chi in all_characters(ring) if not chi.is_trivial()]
        scope = "every unit vector xi" if cfg.all_xi else f"xi = ({cfg.xi})"
        self.cli.print_phase_header(1, "Character Sums", f"{len(characters)} nontrivial characters mod {q}, {scope}")

        self.cli.print_step(1, "Evaluating SL2 character sums", "in_progress")
        with self.cli.status(f"Scanning SL2({q})"):
            rows = charsum_margins(q, characters, cfg.vectors, strict=False)
        margins_path = cfg.out_dir / "charsum_margins.csv"
        write_margins_csv(rows, margins_path)
        self._emit("charsum_margins.csv", margins_path)

        violations = [row for row in rows if row.margin < -SUM_TOL]
        worst = min(row.margin for row in rows)
        self.cli.print_step(1, f"{len(rows)} sums, smallest margin {worst:.6f}", "failed" if violations else "completed")
        if violations:
            raise BoundViolationError(f"{len(violations)} character sums exceed {sl2_charsum_bound(q):.6f} mod {q}", len(violations))
        self.results["Character sums"] = {"success": True, "details": f"{len(rows)} sums within 2 N(q)^(3/2), min margin {worst:.4f}"}

    def _run_sieve(self):
        cfg = self.config
        self.cli.print_phase_header(1, "Sifting Set", f"Xi in B_{cfg.X:g}, Aleph in B_{cfg.Y:g}, Omega in B_{cfg.Z:g} at R = {cfg.radius:g}")
        self.cli.print_step(1, "Building the sifting set", "in_progress")
        partition = self._partition(cfg.radius)
        with self.cli.status("Collecting words and glue connectors"):
            sifting = build_sifting_set(cfg.radius, cfg.X, cfg.Y, cfg.Z, partition=partition)
            tally = sifting.tally()
        self.cli.print_step(
            1,
            f"|Pi| = {len(sifting.xi)} x {len(sifting.aleph)} x {len(sifting.omega)} = {sifting.size}, C = {sifting.constant():.4f}",
            "completed",
        )

        self.cli.print_phase_header(2, "Sieve Ledger", f"Square-free moduli up to norm {cfg.level}")
        self.cli.print_step(2, "Counting U_q", "in_progress")
        ledger = sieve_ledger(sifting, cfg.level)
        self.cli.print_step(2, f"{len(ledger.rows)} moduli, ledger health {ledger.health:.4f}", "completed")
        ledger_path = cfg.out_dir / "ledger.csv"
        write_ledger_csv(ledger, ledger_path)
        self._emit("ledger.csv", ledger_path)

        details = f"|Pi| = {tally.total}, {len(tally.counts)} traces, sum |r(q)|/|Pi| = {ledger.health:.4f}"
        if cfg.almost_prime_level:
            survivors = almost_prime_count(sifting, cfg.almost_prime_level)
            details += f", {survivors} almost primes at level {cfg.almost_prime_level}"
        self.results["Sieve"] = {"success": True, "details": details}

    def _run_harvest(self):
        cfg = self.config
        self.cli.print_phase_header(1, "Subshift", f"Partition and transitions at R = {cfg.radius:g}")
        partition = self._partition(cfg.radius)
        transitions = self._transitions(partition)
        alphabet = Alphabet(partition)

        self.cli.print_phase_header(2, "Harvest", f"Traces of Gamma_R in B_{cfg.ball:g}")
        self.cli.print_step(1, "Bucketing words by trace", "in_progress")
        with self.cli.status("Enumerating the semigroup ball"):
            report = harvest(alphabet, transitions, cfg.ball, delta=cfg.delta, eta=cfg.eta)
        self.cli.print_step(1, f"{report.words} words, {len(report.rows)} traces", "completed")

        self.cli.print_step(2, "Confirming square-free discriminants by factorization", "in_progress")
        failures = [D for D in report.discriminants if not factor(D).is_squarefree()]
        if failures:
            raise CertificationError(f"Discriminants {', '.join(str(D) for D in failures[:5])} fail the factorization check")
        self.cli.print_step(2, f"{len(report.discriminants)} discriminants confirmed", "completed")
        if not report.discriminants:
            self.cli.print_warning(f"No square-free discriminants at X = {cfg.ball:g}")

        harvest_path = cfg.out_dir / "harvest.csv"
        write_harvest_csv(report, harvest_path)
        self._emit("harvest.csv", harvest_path)
        details = f"{len(report.discriminants)} square-free discriminants from {len(report.rows)} traces"
        if report.threshold_count is not None:
            details += f", {report.threshold_count} above the multiplicity threshold"
        self.results["Harvest"] = {"success": True, "details": details}

    def _write_manifest(self):
        path = write_manifest(self.config.out_dir, self.command, self.config.model_dump(), self.input_hashes, self.outputs)
        self.cli.print_file(str(path), file_sha256(path))


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Flat key=value config file")
    common.add_argument("--quiet", action="store_true", help="Only print errors and the final summary")
    common.add_argument("--out", help="Output directory (default $GEODESIC_LAB_OUT or ./out)")
    common.add_argument("--cache", help="Cache directory (default $GEODESIC_LAB_CACHE or ./.geolab_cache)")
    common.add_argument("--workers", type=int, help="Worker processes (default $GEODESIC_LAB_WORKERS or 1)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="geodesic_lab", description="Closed geodesics of SL2(Z[i]) via Hurwitz continued fractions")
    commands = parser.add_subparsers(dest="command", required=True)

    partition = commands.add_parser("partition", parents=[common], help="Markov partition and transition matrix")
    partition.add_argument("--radius", type=float)
    partition.add_argument("--certify", action=argparse.BooleanOptionalAction, default=None)

    delta = commands.add_parser("delta", parents=[common], help="Growth exponent delta_R")
    delta.add_argument("--radius", type=float)
    delta.add_argument("--tol", type=float)
    delta.add_argument("--max-depth", dest="max_depth", type=int)
    delta.add_argument("--s-step", dest="s_step", type=float)

    enumerate_ = commands.add_parser("enumerate", parents=[common], help="Closed geodesics in a norm ball")
    enumerate_.add_argument("--radius", type=float)
    enumerate_.add_argument("--ball", type=float)
    enumerate_.add_argument("--mod")
    enumerate_.add_argument("--csv")
    enumerate_.add_argument("--all-words", dest="aperiodic_only", action="store_const", const=False, default=None)

    charsums = commands.add_parser("charsums", parents=[common], help="SL2 character sums against 2 N(q)^(3/2)")
    charsums.add_argument("--mod")
    scan = charsums.add_mutually_exclusive_group()
    scan.add_argument("--all-xi", dest="all_xi", action="store_const", const=True, default=None)
    scan.add_argument("--xi")

    sieve = commands.add_parser("sieve", parents=[common], help="Sifting set and sieve ledger")
    sieve.add_argument("--radius", type=float)
    sieve.add_argument("-X", dest="X", type=float)
    sieve.add_argument("-Y", dest="Y", type=float)
    sieve.add_argument("-Z", dest="Z", type=float)
    sieve.add_argument("--level", type=int)
    sieve.add_argument("--almost-prime-level", dest="almost_prime_level", type=int)

    harvest_ = commands.add_parser("harvest", parents=[common], help="Square-free discriminant harvest")
    harvest_.add_argument("--radius", type=float)
    harvest_.add_argument("--ball", type=float)
    harvest_.add_argument("--delta", type=float)
    harvest_.add_argument("--eta", type=float)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    cli = LabCLI(quiet=args.quiet)
    flags = {key: value for key, value in vars(args).items() if key not in ("command", "config", "quiet")}
    try:
        config = build_config(args.command, flags, args.config)
        orchestrator = GeodesicLabOrchestrator(args.command, config, quiet=args.quiet)
        return orchestrator.run()
    except KeyboardInterrupt:
        cli.print_warning("Run interrupted by user")
        return EXIT_FAILURE
    except BoundViolationError as e:
        cli.print_error("Bound violation", f"{e} ({e.violations} violations)")
        return EXIT_BOUND_VIOLATION
    except CertificationError as e:
        cli.print_error("Certification failed", str(e))
        return EXIT_CERTIFICATION
    except ValueError as e:
        cli.print_error("Invalid input", str(e))
        return EXIT_USAGE
    except OSError as e:
        cli.print_error("Could not write outputs", str(e))
        return EXIT_FAILURE
    except Exception as e:
        cli.print_error("Run failed with unexpected error", f"{type(e).__name__}: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
