#!/usr/bin/env python3
"""Re-derives the default timing and energy constants of the perf model.

Targets: 1080p at >= 90 Hz with C=2, M=400, 32x32 patches; <= 60 mW at
30 Hz for a 2 Mpix sensor with 25% of patches active, ADC the largest
term; passive summing node loses 10% in 10 us. Standard library only.
"""

import math

W, H, PATCH, M, C = 1920, 1080, 32, 400, 2
ACTIVE, RATE = 0.25, 30.0
PATCHES = (W // PATCH) * (H // PATCH)


def timing():
    steps = M * math.ceil(PATCH / C)
    budget = 1.0 / 90.0
    t_step_max = budget / steps
    t_dac, t_pwm = 1.0e-6, 0.7e-6
    frame = steps * (t_dac + t_pwm)
    print("timing")
    print(f"  program/integrate steps per frame  {steps}")
    print(f"  max step time for 90 Hz            {t_step_max * 1e6:.4f} us")
    print(f"  chosen t_dac + t_pwm               {(t_dac + t_pwm) * 1e6:.2f} us")
    print(f"  frame time / rate                  {frame * 1e3:.3f} ms / {1 / frame:.2f} Hz")
    print(f"  pixel throughput                   {W * H / frame / 1e6:.2f} Mpix/s")


def power():
    conversions = PATCHES * ACTIVE * M * RATE
    writes = M * PATCH * W * RATE
    e_adc, e_dac = 5e-9, 1e-12
    p_adc = conversions * e_adc
    p_dac = writes * e_dac
    active_px = PATCHES * PATCH * PATCH * ACTIVE
    p_analog = active_px * M * 0.5 * 30e-15 * 0.4 ** 2 * RATE
    p_opamp = PATCHES * 0.5e-6
    p_misc = 5e-3
    total = p_adc + p_dac + p_analog + p_opamp + p_misc
    print("power @ 30 Hz")
    print(f"  ADC conversions/s                  {conversions:.4g}")
    print(f"  weight-line writes/s               {writes:.4g}")
    print(f"  adc / dac / analog / opamp / misc  "
          f"{p_adc * 1e3:.3f} / {p_dac * 1e3:.3f} / {p_analog * 1e3:.4f} / "
          f"{p_opamp * 1e3:.3f} / {p_misc * 1e3:.1f} mW")
    print(f"  total                              {total * 1e3:.2f} mW "
          f"({total * 1e3 / (W * H / 1e6):.2f} mW/Mpix)")
    headroom = 60e-3 - (total - p_dac)
    print(f"  largest E_dac within 60 mW         {headroom / writes * 1e12:.1f} pJ")
    print(f"  largest E_dac keeping ADC dominant {p_adc / writes * 1e12:.1f} pJ")


def droop():
    tau = -10e-6 / math.log(0.9)
    print("passive droop")
    print(f"  tau_leak                           {tau * 1e6:.6f} us")
    print(f"  0.5 V after 10 us                  {0.5 * math.exp(-10e-6 / tau):.12f} V")
    print(f"  same with tau = 94.9 us            {0.5 * math.exp(-10 / 94.9):.9f} V")


if __name__ == "__main__":
    timing()
    power()
    droop()
