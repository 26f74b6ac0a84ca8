#!/usr/bin/env python3
"""Run the desk-scale adaptive sweep and print the phase summary.

Usage: python3 scripts/run_sweep.py [config] [out_dir]
Defaults to configs/desk.ini and ./hiermor-out; equivalent to
`hiermor run configs/desk.ini` plus a console recap.
"""

import sys
from pathlib import Path

import hiermor.cli as cli
from hiermor.config import load_config

config_path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("configs/desk.ini")
config = load_config(config_path)
if len(sys.argv) > 2:
    import dataclasses

    config = dataclasses.replace(config, out_dir=Path(sys.argv[2]))

code = cli.run(config)
summary = (config.out_dir / "summary.txt").read_text()
print(summary)
print(f"outputs written to {config.out_dir}/ (queries.csv, summary.txt, timings.svg)")
sys.exit(code)
