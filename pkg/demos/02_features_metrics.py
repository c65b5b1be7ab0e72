"""Audio features and objective metrics on tones whose answers are known in advance."""

# %% [markdown]
# Two tones one semitone apart. The log-F0 RMSE between them should be
# ln(2^(1/12)) = 0.0578, and no frame should land in the same semitone.

# %%
import numpy as np

from muskit import AudioBuffer, evaluate_pair, extract_f0, mel_cepstrum, mel_spectrogram, resample

SR = 24000
t = np.arange(SR) / SR
ref = AudioBuffer(0.5 * np.sin(2 * np.pi * 220.0 * t), SR)
hyp = AudioBuffer(0.5 * np.sin(2 * np.pi * 220.0 * 2 ** (1 / 12) * t), SR)

# %% [markdown]
# Frames are 1024 samples with a hop of 256, centred, so one second gives
# 1 + 24000 // 256 = 94 frames of every feature.

# %%
logmel, mcep, f0 = mel_spectrogram(ref), mel_cepstrum(ref), extract_f0(ref)
print(logmel.frames.shape, mcep.frames.shape, len(f0))
print("median F0 %.2f Hz, voiced %.0f%%" % (np.median(f0.f0_hz[f0.voiced]), 100 * f0.voiced.mean()))

# %%
report = evaluate_pair(ref, hyp)
print(report.to_dict())
print("expected f0_rmse_log %.5f" % np.log(2 ** (1 / 12)))

# %% [markdown]
# Audio at another rate is brought to the analysis rate first; the report
# says so.

# %%
ref16 = resample(ref, 16000)
print(evaluate_pair(ref16, ref).resampled, round(evaluate_pair(ref16, ref).f0_rmse_log, 5))
