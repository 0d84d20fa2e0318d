"""Regenerate docs/filters.md from the filter designs in drowsiness.dsp."""

from pathlib import Path

import numpy as np

from drowsiness import dsp


def fmt(values):
    return ", ".join(f"{v:.12g}" for v in values)


def section(lines, title, sos, note):
    lines += [f"## {title}", "", note, "", f"Effective length L = {dsp.effective_length(sos)} samples.", "", "```"]
    lines += [fmt(row) for row in sos]
    lines += ["```", ""]


def main():
    lines = [
        "# Filter designs", "",
        "All IIR filters run forward and backward (`scipy.signal.sosfiltfilt`), so the applied magnitude "
        "is |H|² and the phase is zero. Edges use odd extension of `3 × L` samples (capped at n − 1), where "
        "`L` is the number of samples the slowest pole needs to decay by 60 dB.", "",
        "Coefficients are printed to 12 significant digits; the code designs them at run time with scipy. "
        "Regenerate this file with `python3 docs/make_filters_doc.py`.", "",
        "SOS rows are `b0, b1, b2, a0, a1, a2`.", "",
    ]
    section(lines, "Notch, 60 Hz at 200 Hz", dsp.design_notch(60, 2, 200),
            "`scipy.signal.iirnotch(60, Q=30, fs=200)`; quality factor Q = f0 / bandwidth with a 2 Hz bandwidth.")
    section(lines, "Band-pass, 1 to 30 Hz at 200 Hz", dsp.design_bandpass(1, 30, 200),
            "`scipy.signal.butter(4, [1, 30], 'bandpass', fs=200, output='sos')`: 8 poles, 4 per edge.")
    section(lines, "Blink band, 0.5 to 8 Hz at 200 Hz", dsp.design_bandpass(0.5, 8, 200),
            "Used only by the EOG blink counter before robust z-scoring.")
    h = dsp.design_resampler()
    lines += [
        "## Resampler, 200 Hz to 60 Hz", "",
        "`scipy.signal.resample_poly(x, 3, 10, window=h, padtype='line')`, output truncated to floor(3n/10).",
        "`h` starts as `scipy.signal.firwin(201, 30, fs=600, window=('kaiser', 5.0))`; each polyphase branch "
        "`h[r::3]` is then rescaled to sum to 1/3 so constants pass unchanged.", "",
        "Taps (201, symmetric):", "", "```",
    ]
    lines += [fmt(h[i:i + 5]) for i in range(0, h.size, 5)]
    lines += ["```", "", "## Applied magnitude (forward-backward), dB", "",
              "| Hz | notch | band-pass 1-30 |", "|---|---|---|"]
    notch = dsp.design_notch(60, 2, 200)
    band = dsp.design_bandpass(1, 30, 200)
    for f in (0.25, 1, 10, 30, 57, 60, 63):
        n = dsp.magnitude_response(notch, [f], 200)[0]
        b = dsp.magnitude_response(band, [f], 200)[0]
        ncell = "< -300" if n < 1e-15 else f"{20 * np.log10(n):.2f}"
        lines.append(f"| {f:g} | {ncell} | {20 * np.log10(b):.2f} |")
    lines += ["", "The zero-phase pass squares the single-pass response, so each band-pass edge sits at -6 dB.", ""]
    Path(__file__).with_name("filters.md").write_text("\n".join(lines), encoding="utf-8")


if __name__ == "__main__":
    main()
