"""
The command-line workflow
=========================

Drives ``dynct`` through its five subcommands inside a temporary
directory: simulate, reconstruct, score, export and verify.  Status lines
are JSON on stderr.
"""

import tempfile
from pathlib import Path

from dynct.cli import main
from dynct.io import read_metrics_csv

with tempfile.TemporaryDirectory() as tmp:
    d = Path(tmp)
    main(["simulate", "--side", "32", "--frames", "6", "--angles", "20", "--spread-points", "2",
          "--out-dir", str(d)])

    # %%
    # FBP is instant.  The Haar run is capped at 40 iterations to stay quick,
    # which leaves it far from its settled quality.
    main(["reconstruct", "--sinogram", str(d / "sinogram.stack"), "--method", "fbp", "--out-dir", str(d)])
    main(["reconstruct", "--sinogram", str(d / "sinogram.stack"), "--method", "haar", "--max-iters", "40",
          "--out-dir", str(d)])

    # %%
    # One CSV row per method for the first/last-frame average.
    main(["metrics", "--recon", str(d / "recon_fbp.stack"), "--recon", str(d / "recon_haar.stack"),
          "--reference", str(d / "truth.stack"), "--mode", "mean_first_last", "--csv", str(d / "m.csv")])
    for row in read_metrics_csv((d / "m.csv").read_text()):
        print(row)

    # %%
    # Frames become 16-bit PGM images; ``verify`` re-runs a file's provenance.
    main(["export", "--input", str(d / "recon_haar.stack"), "--frames", "0,5", "--out-dir", str(d / "png")])
    main(["verify", "--target", str(d / "recon_haar.stack")])
