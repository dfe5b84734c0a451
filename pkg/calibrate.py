"""Scratch calibration sweep for the desk preset (not part of the package)."""
import sys
import time
from dataclasses import replace

from dashsim import desk_params, generate_scenario, run_simulation, make_scheduler, compute_run_metrics


def sweep(tag, params_fn, counts=(20, 40, 60), seeds=range(10)):
    t0 = time.perf_counter()
    data = {}
    for count in counts:
        for seed in seeds:
            cfg = generate_scenario(params_fn(count), seed)
            for name in ("greedy", "bba", "rba"):
                trace = run_simulation(cfg, make_scheduler(name, cfg), seed=seed, record_rows=False)
                rm = compute_run_metrics(trace)
                data[(count, seed, name)] = rm
    dt = time.perf_counter() - t0

    # criterion 2: greedy thr strictly > bba and rba at every count, per seed
    c2_seeds = 0
    for seed in seeds:
        ok = all(
            data[(c, seed, "greedy")].mean_throughput_kbps > data[(c, seed, "bba")].mean_throughput_kbps
            and data[(c, seed, "greedy")].mean_throughput_kbps > data[(c, seed, "rba")].mean_throughput_kbps
            for c in counts
        )
        c2_seeds += ok
    # criterion 3: pooled mean delay
    def pooled(name, attr):
        vals = [getattr(data[(c, s, name)], attr) for c in counts for s in seeds]
        return sum(vals) / len(vals)
    d_g, d_b, d_r = pooled("greedy", "mean_delay_slots"), pooled("bba", "mean_delay_slots"), pooled("rba", "mean_delay_slots")
    ratio = d_g / min(d_b, d_r)
    # criterion 4: switching
    f_b, f_r = pooled("bba", "switching_freq"), pooled("rba", "switching_freq")
    m_b, m_r = pooled("bba", "switching_mag_kbps"), pooled("rba", "switching_mag_kbps")
    # criterion 6: rmsd per count averaged over seeds
    c6_ok = all(
        sum(data[(c, s, "greedy")].rmsd_utilization for s in seeds)
        <= min(
            sum(data[(c, s, "bba")].rmsd_utilization for s in seeds),
            sum(data[(c, s, "rba")].rmsd_utilization for s in seeds),
        )
        for c in counts
    )
    print(f"[{tag}] {dt:.0f}s  C2 seeds {c2_seeds}/10 | C3 ratio {ratio:.3f} (g={d_g:.1f} b={d_b:.1f} r={d_r:.1f}) | "
          f"C4 freq x{f_b/max(f_r,1e-9):.1f} mag x{m_b/max(m_r,1e-9):.1f} (bba {f_b:.3f}/{m_b:.0f} rba {f_r:.3f}/{m_r:.0f}) | C6 {'ok' if c6_ok else 'FAIL'}")
    return data


def far_sweep(tag, params_fn, counts=(20, 40, 60), seeds=range(10)):
    t0 = time.perf_counter()
    data = {}
    for count in counts:
        for seed in seeds:
            cfg = generate_scenario(replace(params_fn(count), placement="far_near"), seed)
            for name in ("greedy", "bba", "rba"):
                trace = run_simulation(cfg, make_scheduler(name, cfg), seed=seed, record_rows=False)
                data[(count, seed, name)] = compute_run_metrics(trace)
    dt = time.perf_counter() - t0
    c5_seeds = 0
    for seed in seeds:
        ok = all(
            data[(c, seed, "greedy")].jain_index >= data[(c, seed, "bba")].jain_index
            and data[(c, seed, "greedy")].jain_index >= data[(c, seed, "rba")].jain_index
            for c in counts
        )
        c5_seeds += ok
    # monotonicity: inversions per (scheduler, seed)
    worst_inv = 0
    for name in ("greedy", "bba", "rba"):
        for seed in seeds:
            j = [data[(c, seed, name)].jain_index for c in counts]
            inv = sum(1 for a, b in zip(j, j[1:]) if b > a)
            worst_inv = max(worst_inv, inv)
    jg = sum(data[(c, s, 'greedy')].jain_index for c in counts for s in seeds) / 30
    jb = sum(data[(c, s, 'bba')].jain_index for c in counts for s in seeds) / 30
    jr = sum(data[(c, s, 'rba')].jain_index for c in counts for s in seeds) / 30
    print(f"[{tag}/far] {dt:.0f}s  C5 seeds {c5_seeds}/10  worst inversions {worst_inv}  jain g={jg:.4f} b={jb:.4f} r={jr:.4f}")
    return data


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "base"
    variants = {
        "base": lambda c: desk_params(c),
        "sq": lambda c: replace(desk_params(c), area=(400.0, 500.0)),
        "col_light": lambda c: replace(desk_params(c), area=(200.0, 500.0), arrival_window=780, session_min=60, session_max=120),
        "col_mid": lambda c: replace(desk_params(c), area=(200.0, 500.0), arrival_window=700, session_min=100, session_max=200),
        "col_narrow": lambda c: replace(desk_params(c), area=(150.0, 600.0), arrival_window=780, session_min=60, session_max=120),
        "col_heavy": lambda c: replace(desk_params(c), area=(200.0, 500.0), arrival_window=500, session_min=150, session_max=250),
        "col_heavy2": lambda c: replace(desk_params(c), area=(200.0, 500.0), arrival_window=400, session_min=200, session_max=350),
        "col_heavy3": lambda c: replace(desk_params(c), area=(200.0, 500.0), arrival_window=300, session_min=300, session_max=500),
    }
    fn = variants[which]
    sweep(which, fn)
    far_sweep(which, fn)
