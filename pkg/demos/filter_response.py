"""Print the applied (zero-phase) response of the cleaning filters at a few frequencies.

    python3 demos/filter_response.py
"""

import numpy as np

from drowsiness import dsp

FS = 200.0
freqs = np.array([0.25, 0.5, 1.0, 5.0, 10.0, 30.0, 45.0, 58.0, 60.0, 62.0, 80.0])

notch = dsp.magnitude_response(dsp.design_notch(60, 2, FS), freqs, FS)
band = dsp.magnitude_response(dsp.design_bandpass(1, 30, FS), freqs, FS)

print(f"{'Hz':>6} {'notch dB':>10} {'band-pass dB':>13}")
for f, a, b in zip(freqs, notch, band):
    print(f"{f:6.2f} {20 * np.log10(a + 1e-300):10.2f} {20 * np.log10(b + 1e-300):13.2f}")
