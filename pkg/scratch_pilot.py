"""Pilot: criterion-2-style slope validation at 125 VUE/km, 10 MHz."""
import sys
import time
from collections import Counter
from multiprocessing import Pool

import numpy as np

import cv2xsim as cv
from cv2xsim import engine, metrics, tail_model as tm
from cv2xsim.resource_grid import ResourcePool

BW = int(sys.argv[1]) if len(sys.argv) > 1 else 10
REPS = int(sys.argv[2]) if len(sys.argv) > 2 else 3

pool = ResourcePool.from_bandwidth(BW)
ch = cv.ChannelConfig()
sps_cfg = cv.CounterConfig(5, 15, keep_probability=0.8)
sc = engine.ScenarioConfig(highway_length_m=2000.0, density_vue_per_km=125.0,
                           sim_time_s=100.0, warmup_s=10.0)

def run(args):
    oneshot, rep = args
    ocfg = None if oneshot is None else cv.CounterConfig(*oneshot, keep_probability=0.0)
    seq = np.random.SeedSequence(entropy=2024, spawn_key=(0 if oneshot is None else oneshot[0], rep))
    return engine.run_replication(sc, pool, ch, sps_cfg, ocfg, True, seq)

for oneshot in (None, (2, 6), (5, 15)):
    t0 = time.time()
    with Pool(2) as p:
        results = p.map(run, [(oneshot, r) for r in range(REPS)])
    store, gaps = engine.merge_replications(results)
    b = metrics.bin_index_for_center(200)
    pf = cv.prr(store, b)
    curve = cv.ccdf(store, b)
    mode_itt = max(gaps.items(), key=lambda kv: kv[1])[0]
    sps_model = tm.sps_params(5, 15, 0.8)
    om = None if oneshot is None else tm.oneshot_params(*oneshot)
    cfg = tm.TailModelConfig(sps_model, om, p_f=pf, interferer_mode="single", k_max=60)
    analytic = tm.tail(cfg)
    for lo, hi in ((1000, 5000), (1000, 4000), (1500, 5000)):
        try:
            cmp = tm.compare_slopes(analytic, curve, lo, hi, period_ms=100.0)
            print(f"bw={BW} oneshot={oneshot} fit=[{lo},{hi}] pf={pf:.3f} "
                  f"slope_a={cmp.slope_analytic:.4f} slope_s={cmp.slope_simulated:.4f} "
                  f"gap={cmp.relative_gap:.3f} itt_mode={mode_itt} n={store.ipg_sample_count(b)} "
                  f"({time.time()-t0:.0f}s)")
        except ValueError as e:
            print(f"bw={BW} oneshot={oneshot} fit=[{lo},{hi}]: {e}")
    for thr in (1000, 2000, 3000, 4000, 5000):
        print(f"   ccdf({thr})={curve.fraction_above(thr):.3e}", end="")
    print()
