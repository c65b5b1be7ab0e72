"""Discrete tokens: k-means (semantic) and residual VQ (acoustic) over log-mel frames."""

# %%
import numpy as np

from muskit import AudioBuffer, kmeans_fit, mel_spectrogram, rvq_decode, rvq_encode, rvq_fit, tokenize
from muskit.tokens import format_token_line, read_codebook, write_codebook

SR = 24000
t = np.arange(2 * SR) / SR
# a tone that steps through four pitches gives four clearly separated spectra
freq = np.repeat([220.0, 277.2, 329.6, 440.0], SR // 2)
audio = AudioBuffer(0.4 * np.sin(2 * np.pi * np.cumsum(freq) / SR), SR)
frames = mel_spectrogram(audio)

# %% [markdown]
# k-means with k-means++ seeding. The WCSS history never goes up, and the same
# seed always gives the same codebook bytes.

# %%
cb = kmeans_fit(frames, 4, seed=0)
print("WCSS per iteration:", [round(w, 1) for w in cb.wcss_history])
assert write_codebook(cb) == write_codebook(kmeans_fit(frames, 4, seed=0))
tokens = tokenize(frames, cb)
print(format_token_line("demo", tokens)[:80], "...")

# %% [markdown]
# Residual VQ codes what the previous stages left over. Reconstruction error
# falls as stages are added.

# %%
rvq = rvq_fit(frames, n_stages=3, k_per_stage=8, seed=0)
codes = rvq_encode(frames, rvq)
for s in range(4):
    err = np.mean((rvq_decode(codes, rvq, n_stages=s).frames - frames.frames) ** 2)
    print(f"{s} stages: mse {err:.4f}")

# %% [markdown]
# Codebooks are stored in a small binary format that records the feature kind
# and seed.

# %%
back = read_codebook(write_codebook(rvq))
print(type(back).__name__, len(back.stages), back.stages[0].feature_kind)
