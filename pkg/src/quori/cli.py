"""Command-line entry point: ``quori <group> <command> [options]``.

Exit codes: 0 success, 1 validation error, 2 parse error.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import arm, base, head, sensors, sim, waist
from .config import (
    PlatformConfig,
    apply_estop,
    bom_total,
    default_bom_text,
    default_config,
    load_config_file,
    mass_total,
    parse_bom,
    power_runtime,
    serialize_config,
    PowerState,
)
from .errors import InfeasibleError, ParseError, QuoriError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_PARSE = 0, 1, 2


def _config(args) -> PlatformConfig:
    return load_config_file(args.config) if getattr(args, "config", None) else default_config()


def _writer(out: str | None):
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    return fh, csv.writer(fh, lineterminator="\n")


def _close(fh) -> None:
    if fh is not sys.stdout:
        fh.close()


def _f(x: float) -> str:
    return sim._fmt(x)


# -- base ---------------------------------------------------------------------

def cmd_base_fk(args) -> int:
    config = _config(args)
    rates = base.ActuatorRates(args.omega_l, args.omega_r, args.omega_t)
    state = base.BaseState(theta_t=math.radians(args.theta_t))
    twist = base.forward_kinematics(rates, state, config)
    violations = base.check_limits(rates, config)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["ux", "uy", "psi_dot", "violations"])
    w.writerow([_f(twist.ux), _f(twist.uy), _f(twist.psi_dot), ";".join(map(str, violations))])
    return EXIT_OK


def cmd_base_ik(args) -> int:
    config = _config(args)
    twist = base.BodyTwist(args.ux, args.uy, args.psi_dot)
    state = base.BaseState(theta_t=math.radians(args.theta_t))
    rates = base.inverse_kinematics(twist, state, config)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["omega_l", "omega_r", "omega_t"])
    w.writerow([_f(rates.omega_l), _f(rates.omega_r), _f(rates.omega_t)])
    return EXIT_OK


# -- waist --------------------------------------------------------------------

def cmd_waist_sweep(args) -> int:
    config = _config(args)
    model = config.torso
    variants = {
        "uncompensated": model.uncompensated(),
        "battery": model.with_lower_mass(waist.BATTERY_MASS, waist.COUNTER_MASS_LEVER),
        "compensated": model,
    }
    theta = math.radians(args.theta_deg)
    if not config.waist_limits.contains(theta):
        raise ValidationError(f"theta_w {args.theta_deg} deg outside waist limits", key="theta_deg")
    fh, w = _writer(args.out)
    try:
        w.writerow(["variant", "phi_a_deg", "torque_Nm"])
        for name, variant in variants.items():
            for phi, torque in waist.sweep_curve(variant, theta, args.step):
                w.writerow([name, _f(phi), _f(torque)])
    finally:
        _close(fh)
    for name, variant in variants.items():
        peak, pose = waist.peak_holding_torque(variant, config.waist_limits)
        print(
            f"{name}: peak {peak:.3f} N m at theta_w={math.degrees(pose.theta_w):.1f} deg, "
            f"phi_a={math.degrees(pose.phi_a):.1f} deg",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_waist_tune(args) -> int:
    config = _config(args)
    battery = config.torso.with_lower_mass(waist.BATTERY_MASS, waist.COUNTER_MASS_LEVER)
    mass = waist.tune_counter_mass(battery, args.target, args.lever, config.waist_limits)
    print(f"added_mass_kg,{_f(mass)}")
    return EXIT_OK


# -- arm ----------------------------------------------------------------------

ARM_TRACE_HEADER = ("t_s", "tau1", "tau2", "load_circ", "load_abd")
ARM_LOG_HEADER = (
    "t_s", "alpha1", "alpha2", "q_circ", "q_abd", "slip1", "slip2",
    "out_torque1", "out_torque2", "slip_flag", "events",
)


def _read_arm_trace(path: str) -> list[tuple[float, float, float, float, float]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        header_seen = False
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            cells = [c.strip() for c in row]
            if not header_seen:
                if tuple(cells) != ARM_TRACE_HEADER:
                    raise ParseError(f"expected header {','.join(ARM_TRACE_HEADER)}", line=lineno, source=path)
                header_seen = True
                continue
            try:
                values = tuple(float(c) for c in cells)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno, source=path) from None
            if len(values) != len(ARM_TRACE_HEADER):
                raise ParseError(f"expected {len(ARM_TRACE_HEADER)} columns", line=lineno, source=path)
            if rows and not values[0] > rows[-1][0]:
                raise ParseError("times must increase", line=lineno, source=path)
            rows.append(values)
    return rows


def cmd_arm_step(args) -> int:
    config = _config(args)
    spec = config.transmission
    if args.trace:
        trace = _read_arm_trace(args.trace)
    else:
        trace = [
            ((k + 1) * args.dt, args.tau1, args.tau2, args.load_circ, args.load_abd)
            for k in range(args.steps)
        ]
    state = arm.state_from_joint(math.radians(args.q_circ), math.radians(args.q_abd), spec)
    fh, w = _writer(args.out)
    t_prev = 0.0
    slips = 0
    try:
        w.writerow(ARM_LOG_HEADER)
        for t, tau1, tau2, load_c, load_a in trace:
            result = arm.step_dynamics(state, (tau1, tau2), (load_c, load_a), t - t_prev, spec)
            state, t_prev = result.state, t
            slips += len(result.events)
            enc = arm.read_encoders(state, spec)
            estimate = arm.detect_slip(enc.motor, enc.output, spec)
            events = ";".join(f"{e.path}:{e.cause}:{e.slip:.6g}" for e in result.events)
            w.writerow([
                _f(t), _f(state.alpha1), _f(state.alpha2), _f(state.q_circ), _f(state.q_abd),
                _f(state.slip_offset1), _f(state.slip_offset2),
                _f(result.output_torque[0]), _f(result.output_torque[1]),
                "1" if estimate.flagged else "0", events,
            ])
    finally:
        _close(fh)
    print(f"steps={len(trace)} slip_events={slips}", file=sys.stderr)
    return EXIT_OK


# -- head ---------------------------------------------------------------------

def cmd_head_rings(args) -> int:
    config = _config(args)
    fh, w = _writer(args.out)
    try:
        w.writerow(["theta_deg", "ring_pixels"])
        for theta, count in head.ring_table(config.head, args.step):
            w.writerow([_f(theta), count])
    finally:
        _close(fh)
    return EXIT_OK


def cmd_head_render(args) -> int:
    config = _config(args)
    if args.texture:
        pixels = head.read_pnm(args.texture)
    else:
        pixels = head.FaceTexture.uniform().pixels
    texture = head.FaceTexture(pixels, math.radians(args.yaw), math.radians(args.pitch))
    frame = head.render_face(texture, config.head)
    head.write_pnm(args.out, frame)
    lit = int(np.count_nonzero(frame.reshape(frame.shape[0], frame.shape[1], -1).any(axis=2)))
    print(f"wrote {args.out}: {frame.shape[1]}x{frame.shape[0]}, {lit} lit pixels", file=sys.stderr)
    return EXIT_OK


# -- fov ----------------------------------------------------------------------

def cmd_fov_camera(args) -> int:
    config = _config(args)
    mount = replace(config.camera, manual_tilt=math.radians(args.tilt))
    mount.validate()
    frustum = sensors.camera_frustum(mount, math.radians(args.bow), config.waist_limits)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["pitch_deg", "half_h_deg", "half_v_deg", "near_m", "far_m"])
    near = "" if frustum.near_distance is None else _f(frustum.near_distance)
    far = "" if frustum.far_distance is None else _f(frustum.far_distance)
    w.writerow([
        _f(math.degrees(frustum.pitch)), _f(math.degrees(frustum.half_h)),
        _f(math.degrees(frustum.half_v)), near, far,
    ])
    w.writerow(["corner", "x_m", "y_m"])
    for i, (x, y) in enumerate(frustum.footprint):
        w.writerow([i, _f(x), _f(y)])
    return EXIT_OK


def cmd_fov_laser(args) -> int:
    config = _config(args)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["kind", "start_deg", "end_deg", "width_deg"])
    for arc in sensors.laser_coverage(config.laser):
        w.writerow(["visible", *(_f(v) for v in arc.as_floats())])
    for arc in sensors.shadow_intervals(config.laser):
        w.writerow(["shadow", *(_f(v) for v in arc.as_floats())])
    return EXIT_OK


# -- rollups ------------------------------------------------------------------

def cmd_bom_check(args) -> int:
    if args.file:
        text, source = Path(args.file).read_text(encoding="utf-8"), args.file
    else:
        text, source = default_bom_text(), "default_bom.csv"
    bom = parse_bom(text, source=source)
    for line in bom.mismatches():
        print(
            f"warning: {line.subsystem} / {line.item}: printed subtotal "
            f"{line.subtotal_cents / 100:.2f} != {line.qty} x {line.unit_cost_cents / 100:.2f}",
            file=sys.stderr,
        )
    print(f"lines,{len(bom.lines)}")
    print(f"total_usd,{bom_total(bom)}")
    return EXIT_OK


def cmd_mass_total(args) -> int:
    print(f"total_kg,{_f(mass_total(_config(args)))}")
    return EXIT_OK


def cmd_power_estimate(args) -> int:
    config = _config(args)
    hours = power_runtime(config.battery, args.draw)
    print(f"energy_wh,{_f(config.battery.energy_wh)}")
    print(f"runtime_h,{_f(hours)}")
    if args.estop:
        state = apply_estop(PowerState(), True)
        print(f"estop,motor_bus={int(state.motor_bus_on)},compute_bus={int(state.compute_bus_on)}")
    return EXIT_OK


# -- config / sim -------------------------------------------------------------

def cmd_config_dump(args) -> int:
    sys.stdout.write(serialize_config(_config(args)))
    return EXIT_OK


def _resolve_scenario(name: str) -> sim.Scenario:
    path = Path(name)
    if path.exists():
        return sim.load_scenario(path)
    try:
        return sim.builtin_scenario(name)
    except FileNotFoundError:
        raise ValidationError(f"no scenario file or built-in scenario named {name!r}", key="scenario") from None


def _run_one(job: tuple[str, str | None, float, str]) -> tuple[str, str]:
    name, config_path, duration, out_dir = job
    config = load_config_file(config_path) if config_path else default_config()
    scenario = _resolve_scenario(name)
    log = sim.run_scenario(scenario, config, duration)
    report = sim.write_run(log, config, out_dir)
    return out_dir, report.text()


def cmd_sim_run(args) -> int:
    if not args.duration > 0:
        raise ValidationError(f"duration must be > 0, got {args.duration!r}", key="duration")
    out = Path(args.out)
    if len(args.scenario) == 1:
        jobs = [(args.scenario[0], args.config, args.duration, str(out))]
    else:
        stems = [Path(s).stem for s in args.scenario]
        if len(set(stems)) != len(stems):
            raise ValidationError("batch scenario names must be unique", key="scenario")
        jobs = [(s, args.config, args.duration, str(out / stem)) for s, stem in zip(args.scenario, stems)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    breach = False
    for out_dir, text in results:
        print(f"== {out_dir}")
        sys.stdout.write(text)
        breach |= "ASSERTION BREACH" in text
    return EXIT_VALIDATION if breach else EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quori", description="Quori platform model tools")
    parser.add_argument("--config", help="platform config file (key = value)")
    groups = parser.add_subparsers(dest="group", required=True)

    def group(name: str, help_text: str):
        sub = groups.add_parser(name, help=help_text)
        return sub.add_subparsers(dest="command", required=True)

    def command(parent, name: str, func, help_text: str):
        p = parent.add_parser(name, help=help_text)
        p.add_argument("--config", default=argparse.SUPPRESS, help="platform config file")
        p.set_defaults(func=func)
        return p

    g = group("sim", "scenario simulation")
    p = command(g, "run", cmd_sim_run, "run one or more scenarios")
    p.add_argument("scenario", nargs="+", help="scenario CSV path or built-in name (museum_demo)")
    p.add_argument("--duration", type=float, default=40.0, help="simulated seconds")
    p.add_argument("--out", default="run", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel scenarios in batch mode")

    g = group("base", "base kinematics")
    p = command(g, "fk", cmd_base_fk, "actuator rates -> body twist")
    p.add_argument("--omega-l", type=float, required=True, help="rad/s")
    p.add_argument("--omega-r", type=float, required=True, help="rad/s")
    p.add_argument("--omega-t", type=float, required=True, help="rad/s")
    p.add_argument("--theta-t", type=float, default=0.0, help="turret angle, deg")
    p = command(g, "ik", cmd_base_ik, "body twist -> actuator rates")
    p.add_argument("--ux", type=float, required=True, help="m/s, torso forward")
    p.add_argument("--uy", type=float, required=True, help="m/s, torso left")
    p.add_argument("--psi-dot", type=float, required=True, help="rad/s")
    p.add_argument("--theta-t", type=float, default=0.0, help="turret angle, deg")

    g = group("waist", "waist torque model")
    p = command(g, "sweep", cmd_waist_sweep, "holding torque vs arm flexion")
    p.add_argument("--theta-deg", type=float, default=30.0, help="waist angle")
    p.add_argument("--step", type=float, default=5.0, help="arm angle step, deg")
    p.add_argument("--out", help="CSV path (default stdout)")
    p = command(g, "tune", cmd_waist_tune, "counter mass for a target peak")
    p.add_argument("--target", type=float, default=2.0, help="N m")
    p.add_argument("--lever", type=float, default=waist.COUNTER_MASS_LEVER, help="m")

    g = group("arm", "shoulder transmission")
    p = command(g, "step", cmd_arm_step, "replay a torque/load trace")
    p.add_argument("--trace", help=f"CSV with columns {','.join(ARM_TRACE_HEADER)}")
    p.add_argument("--tau1", type=float, default=0.0)
    p.add_argument("--tau2", type=float, default=0.0)
    p.add_argument("--load-circ", type=float, default=0.0)
    p.add_argument("--load-abd", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--q-circ", type=float, default=0.0, help="initial, deg")
    p.add_argument("--q-abd", type=float, default=0.0, help="initial, deg")
    p.add_argument("--out", help="CSV path (default stdout)")

    g = group("head", "projected face")
    p = command(g, "render", cmd_head_render, "render a face texture to a projector frame")
    p.add_argument("--texture", help="equirectangular PPM/PGM (default: white)")
    p.add_argument("--yaw", type=float, default=0.0, help="deg")
    p.add_argument("--pitch", type=float, default=0.0, help="deg")
    p.add_argument("--out", required=True, help="output PPM")
    p = command(g, "rings", cmd_head_rings, "pixels per latitude ring")
    p.add_argument("--step", type=float, default=5.0, help="deg")
    p.add_argument("--out", help="CSV path (default stdout)")

    g = group("fov", "sensor coverage")
    p = command(g, "camera", cmd_fov_camera, "camera frustum and floor footprint")
    p.add_argument("--tilt", type=float, default=0.0, help="manual tilt, deg (down positive)")
    p.add_argument("--bow", type=float, default=0.0, help="waist angle, deg")
    command(g, "laser", cmd_fov_laser, "visible laser arcs")

    g = group("bom", "bill of materials")
    p = command(g, "check", cmd_bom_check, "parse a BOM CSV and total it")
    p.add_argument("file", nargs="?", help="BOM CSV (default: shipped table)")

    g = group("mass", "mass table")
    command(g, "total", cmd_mass_total, "total platform mass")

    g = group("power", "power budget")
    p = command(g, "estimate", cmd_power_estimate, "runtime at a constant draw")
    p.add_argument("--draw", type=float, required=True, help="W")
    p.add_argument("--estop", action="store_true", help="also show the e-stop bus state")

    g = group("config", "platform config")
    command(g, "dump", cmd_config_dump, "print the effective config")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValidationError, InfeasibleError) as exc:
        key = getattr(exc, "key", None)
        print(f"validation error{f' [{key}]' if key else ''}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except QuoriError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
