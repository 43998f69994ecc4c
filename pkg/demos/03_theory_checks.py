"""Numerically verify the spectral-damage variance formulas against their
independent Monte-Carlo and quadrature oracles, and check that predicted
damage grows monotonically with the diffusion step.

Run: python demos/03_theory_checks.py
"""

from spectralpurify import diffusion, theory

schedule = diffusion.default_schedule(100)

print("Phase-difference variance (first order): closed form vs oracles")
print("  K     closed      MC(1e6)     quadrature")
for K in (0.1, 0.3, 0.5, 0.7, 0.9):
    pred = theory.phase_variance_pred(K)
    mc = theory.phase_variance_mc(K, n=10**6, seed=1)
    quad = theory.phase_variance_quad(K)
    print(f"  {K:.1f}  {pred:9.6f}  {mc:9.6f}  {quad:12.9f}")

print("\nAmplitude-difference variance at the deepest in-regime step (SNR >= 3)")
print("  a0    t    closed      Rice MC(1e6)   rel err")
for a0 in (3.0, 10.0, 20.0):
    ts = [t for t in range(1, schedule.T + 1) if theory.snr(a0, 1.0, t, schedule) >= 3.0]
    t = ts[-1]
    pred = theory.amp_variance_pred(a0, t, schedule)
    mc = theory.amp_variance_mc(a0, t, schedule, n=10**6, seed=2)
    print(f"  {a0:4.0f}  {t:3d}  {pred:9.6f}   {mc:9.6f}     {abs(mc-pred)/mc:.2%}")

print("\nMonotonicity of predicted damage with t (within the validity regime)")
for row in theory.monotonicity_report(schedule, (3.0, 10.0, 20.0)):
    print(f"  a0={row['a0']:4.0f}: {row['steps_in_regime']:3d} steps, "
          f"amplitude increasing={row['amp_strictly_increasing']}, "
          f"phase increasing={row['phase_strictly_increasing']}")

print("\nEdge of validity: for a0 around 30 the amplitude approximation peaks")
print("inside the SNR >= 3 window (its correction term ~ 1/(16 a0^2 abar)")
print("overtakes the growth right at the regime boundary):")
for row in theory.monotonicity_report(schedule, (30.0,)):
    print(f"  a0={row['a0']:4.0f}: amplitude increasing={row['amp_strictly_increasing']}")
