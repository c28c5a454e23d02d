import numpy as np
import pytest

from lanemd import (IterationRecord, ScenarioError,
                    SimulationDivergedError, TraversalKind, emit_csv,
                    emit_summary, parse_scenario, read_records_csv,
                    run_simulation)
from lanemd.cli import main
from lanemd.driver import CSV_COLUMNS, build_initial_state
from lanemd.tuning import Configuration

SMALL = """
box: 12 12 12
cutoff: 2.5
iterations: {iterations}
dt: 0.002
seed: 3
samples: 1
tuning_interval: {interval}
rebuild_period: {rebuild}
containers: lc
traversals: lc_c08 lc_c18
newton3: on off
patterns: one_by_v v_by_one
metric: laneops

object:
  origin: 3 3 3
  counts: 5 5 5
  spacing: 1.2
  jitter: 0.05
"""


def small_spec(tmp_path, iterations=30, interval=20, rebuild=1000):
    path = tmp_path / "small.txt"
    path.write_text(SMALL.format(iterations=iterations, interval=interval,
                                 rebuild=rebuild))
    return parse_scenario(path)


def fixed(container="lc", traversal="lc_c08", newton3="true",
          pattern="one_by_v"):
    return Configuration.parse(f"{container},{traversal},{newton3},{pattern}")


def test_equilibrium_pair_stays_put(tmp_path):
    path = tmp_path / "pair.txt"
    d = 2.0 ** (1 / 6)
    path.write_text(f"""
box: 10 10 10
cutoff: 3
iterations: 10
dt: 0.001

object:
  origin: 4 5 5
  counts: 2 1 1
  spacing: {d!r}
""")
    spec = parse_scenario(path)
    records, summary = run_simulation(spec, fixed_config=fixed())
    # forces vanish at the potential minimum: nothing moves
    assert len(records) == 10
    assert summary.final_max_speed * spec.params.dt * 10 < 1e-12


def test_record_completeness_and_phase_counts(tmp_path):
    spec = small_spec(tmp_path, iterations=30, interval=20)
    records, summary = run_simulation(spec)
    assert len(records) == 30
    # 8 valid configs: {c08, c18} x {on, off} x 2 patterns, S=1
    first_phase = records[:8]
    assert all(r.phase == "tuning" for r in first_phase)
    assert len({r.configuration.label for r in first_phase}) == 8
    # production runs the selected config until the interval elapses
    assert all(r.phase == "production" for r in records[8:20])
    assert len({r.configuration.label for r in records[8:20]}) == 1
    assert records[20].phase == "tuning"


def test_fixed_config_skips_tuning(tmp_path):
    spec = small_spec(tmp_path, iterations=5)
    records, summary = run_simulation(spec, fixed_config=fixed())
    assert all(r.phase == "production" for r in records)
    assert summary.phase_selections == []


def test_default_tuning_interval_covers_one_pass(tmp_path):
    spec = small_spec(tmp_path, iterations=10)
    spec.tuning_interval = None
    spec.samples_per_config = 200  # 8 configs: one pass needs 1600 > 1000
    records, _ = run_simulation(spec)
    assert all(r.phase == "tuning" for r in records)


def test_explicit_short_tuning_interval_rejected(tmp_path):
    from lanemd import ConfigurationError
    spec = small_spec(tmp_path, iterations=10, interval=4)
    with pytest.raises(ConfigurationError):
        run_simulation(spec)


def test_physics_invariant_across_configurations(tmp_path):
    """Final positions after 100 steps agree across all configurations."""
    from lanemd import (POST_FORCE, PRE_FORCE, apply_boundaries,
                        velocity_verlet_step)
    from lanemd.driver import force_phase

    spec = small_spec(tmp_path, iterations=100)
    configs = [fixed("lc", "lc_c08", "true", "one_by_v"),
               fixed("lc", "lc_c18", "false", "two_by_half"),
               fixed("lc", "lc_c01", "false", "v_by_one"),
               fixed("vcl", "vcl", "true", "half_by_two"),
               fixed("vcl", "vcl", "false", "one_by_v")]
    finals = []
    for config in configs:
        buf = build_initial_state(spec)
        for _ in range(100):
            velocity_verlet_step(buf, spec.params, PRE_FORCE)
            force_phase(buf, spec.box, spec.params, config, 8)
            velocity_verlet_step(buf, spec.params, POST_FORCE)
            apply_boundaries(buf, spec.box)
        finals.append(buf.positions())
    scale = np.abs(finals[0]).max()
    for label, final in zip(configs[1:], finals[1:]):
        assert np.allclose(final, finals[0], rtol=1e-9, atol=1e-9 * scale), \
            label.label


def test_momentum_conserved_between_wall_contacts(tmp_path, rng):
    """Reflective box, newton3 on: total momentum holds while no particle
    touches a wall."""
    from lanemd import POST_FORCE, PRE_FORCE, velocity_verlet_step
    from lanemd.driver import force_phase
    from conftest import jittered_lattice, make_buffer

    spec = small_spec(tmp_path, iterations=1)
    buf = make_buffer(jittered_lattice(rng, (4, 4, 4), 1.25, 0.1,
                                       origin=(3.0, 3.0, 3.0)))
    for arr in (buf.vel_x, buf.vel_y, buf.vel_z):
        arr[:] = rng.uniform(-0.05, 0.05, len(buf))
    config = fixed("lc", "lc_c08", "true", "one_by_v")
    p_prev = np.array([buf.vel_x.sum(), buf.vel_y.sum(), buf.vel_z.sum()])
    for _step in range(200):
        velocity_verlet_step(buf, spec.params, PRE_FORCE)
        force_phase(buf, spec.box, spec.params, config, 8)
        velocity_verlet_step(buf, spec.params, POST_FORCE)
        p_now = np.array([buf.vel_x.sum(), buf.vel_y.sum(), buf.vel_z.sum()])
        assert np.abs(p_now - p_prev).max() < 1e-9
        p_prev = p_now
        # interior start and tiny velocities: walls are never reached
        assert buf.pos_x.min() > 0.5 and buf.pos_x.max() < 11.5


def test_metric_laneops_is_pure_function_of_state(tmp_path):
    spec = small_spec(tmp_path, iterations=12)
    a, _ = run_simulation(spec, fixed_config=fixed())
    b, _ = run_simulation(spec, fixed_config=fixed())
    assert [r.metric_value for r in a] == [r.metric_value for r in b]
    assert all(r.metric_value == r.lane_slots for r in a)


def test_csv_round_trip(tmp_path):
    spec = small_spec(tmp_path, iterations=8)
    records, summary = run_simulation(spec)
    path = tmp_path / "out.csv"
    emit_csv(records, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 9
    back = read_records_csv(path)
    assert back == records


def test_csv_single_record_two_lines(tmp_path):
    record = IterationRecord(0, "production", fixed(), 1.5, 8, 4, 4, 2, 10)
    path = tmp_path / "one.csv"
    emit_csv([record], path)
    assert len(path.read_text().splitlines()) == 2


def test_csv_requires_records(tmp_path):
    with pytest.raises(ScenarioError):
        emit_csv([], tmp_path / "empty.csv")


def test_rolling_mean_postprocessing(tmp_path):
    pandas = pytest.importorskip("pandas")
    spec = small_spec(tmp_path, iterations=25)
    records, _ = run_simulation(spec)
    path = tmp_path / "roll.csv"
    emit_csv(records, path)
    frame = pandas.read_csv(path)
    smooth = frame["metric_value"].rolling(window=5).mean()
    assert np.isnan(smooth.iloc[3])
    assert smooth.iloc[4] == pytest.approx(
        np.mean([r.metric_value for r in records[:5]]))


def test_summary_totals_are_consistent(tmp_path):
    spec = small_spec(tmp_path, iterations=30)
    records, summary = run_simulation(spec)
    assert summary.total_metric == pytest.approx(
        sum(r.metric_value for r in records))
    assert summary.particle_count == 125
    path = tmp_path / "summary.txt"
    emit_summary(summary, path)
    text = path.read_text()
    assert "per_config_metric:" in text
    assert f"particle_count: 125" in text


def test_divergence_aborts_with_partial_records(tmp_path):
    path = tmp_path / "explode.txt"
    path.write_text("""
box: 12 12 12
cutoff: 2.5
iterations: 500
dt: 50.0

object:
  origin: 3 3 3
  counts: 4 4 4
  spacing: 1.0
""")
    spec = parse_scenario(path)
    with pytest.raises(SimulationDivergedError) as info:
        run_simulation(spec, fixed_config=fixed())
    assert hasattr(info.value, "records")


# ----------------------------------------------------------------- the CLI

def test_cli_run_and_outputs(tmp_path):
    scenario = tmp_path / "cli.txt"
    scenario.write_text(SMALL.format(iterations=12, interval=20, rebuild=1000))
    csv_path = tmp_path / "cli.csv"
    summary_path = tmp_path / "cli.txt.summary"
    code = main(["run", str(scenario), "--csv", str(csv_path),
                 "--summary", str(summary_path), "--iterations", "9",
                 "--fixed-config", "lc,lc_c08,true,one_by_v"])
    assert code == 0
    assert len(read_records_csv(csv_path)) == 9
    assert summary_path.exists()


def test_cli_invalid_scenario_exit_code(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("box: 10 10 10\n")
    assert main(["run", str(bad)]) == 1
    assert main(["run", str(tmp_path / "missing.txt")]) == 1
    scenario = tmp_path / "ok.txt"
    scenario.write_text(SMALL.format(iterations=3, interval=20, rebuild=1000))
    assert main(["run", str(scenario), "--fixed-config", "lc,vcl,on,one_by_v"]) == 1
    assert main(["run", str(scenario), "--vector-width", "3"]) == 1


def test_cli_diverged_exit_code(tmp_path):
    scenario = tmp_path / "div.txt"
    scenario.write_text("""
box: 12 12 12
cutoff: 2.5
iterations: 500
dt: 80.0

object:
  origin: 3 3 3
  counts: 4 4 4
""")
    csv_path = tmp_path / "partial.csv"
    assert main(["run", str(scenario), "--csv", str(csv_path),
                 "--fixed-config", "lc,lc_c08,true,one_by_v"]) == 2
    assert csv_path.exists()


def test_cli_io_error_exit_code(tmp_path):
    scenario = tmp_path / "io.txt"
    scenario.write_text(SMALL.format(iterations=3, interval=20, rebuild=1000))
    assert main(["run", str(scenario), "--csv",
                 str(tmp_path / "no_dir" / "out.csv")]) == 3


def test_determinism_identical_runs_byte_identical(tmp_path):
    scenario = tmp_path / "det.txt"
    scenario.write_text(SMALL.format(iterations=25, interval=20, rebuild=6))
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert main(["run", str(scenario), "--csv", str(out_a)]) == 0
    assert main(["run", str(scenario), "--csv", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
