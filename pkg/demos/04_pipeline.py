"""The whole pipeline on a synthetic corpus: prepare, lint, tokenize, evaluate, score MOS.

The same steps are available from the shell as ``muskit prepare``, ``muskit
lint``, ``muskit train-tokenizer``, ``muskit tokenize`` and ``muskit evaluate``.
"""

# %%
import io
import json
import tempfile
from pathlib import Path

from muskit.corpus import make_corpus, make_eval_dirs
from muskit.perception import MockMosServer
from muskit.pipeline import PipelineConfig, cmd_evaluate, cmd_lint, cmd_prepare, cmd_tokenize, cmd_train_tokenizer

work = Path(tempfile.mkdtemp(prefix="muskit-demo-"))
manifest = make_corpus(work / "corpus", n_utts=4, seed=0)
print(manifest.read_text().splitlines()[0])

# %% [markdown]
# The corpus mixes canonical JSON, MusicXML and MIDI scores. Lint prints one
# JSON line per finding; a clean corpus prints nothing and returns 0.

# %%
out = io.StringIO()
print("lint exit code", cmd_lint(manifest, PipelineConfig(), fix=False, stdout=out), repr(out.getvalue()))

# %% [markdown]
# prepare resamples, lints, corrects, segments at rests and writes per-segment
# audio, scores and feature files, plus an index.

# %%
config = PipelineConfig(tokenizer={"k": 16, "seed": 0})
print("prepare exit code", cmd_prepare(manifest, config, work / "dataset"))
index = json.loads((work / "dataset" / "index.json").read_text())
print(len(index["segments"]), "segments; first:", index["segments"][0])

# %%
book = cmd_train_tokenizer(work / "dataset", config, "semantic")
tokens = cmd_tokenize(work / "dataset", book, config)
print(tokens.read_text().splitlines()[0][:100], "...")

# %% [markdown]
# Evaluation pairs WAVs by file name. Here the hypotheses are the references
# one semitone sharp, and a mock MOS service answers the perception queries.

# %%
ref, hyp = make_eval_dirs(work / "eval", n_utts=3, seed=0)
with MockMosServer() as server:
    code, report = cmd_evaluate(ref, hyp, config, work / "report", mos_endpoint=server.endpoint)
print("evaluate exit code", code)
print(json.dumps(report["mean"], indent=1))
print((work / "report" / "report.csv").read_text())
