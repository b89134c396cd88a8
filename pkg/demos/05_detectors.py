"""Best key rate per aperture for three detector generations (MMSE correction).

Same channel and protocol models as before, only the dark-count rate and
efficiency change. This takes a few minutes: every aperture needs its own
turbulence simulation.
"""
from geoqkd.config import RunConfig
from geoqkd.protocols.common import DETECTORS
from geoqkd.workflow import channel_from_config, keyrate_from_pdte

base = RunConfig.default()
pdtes = {D: channel_from_config(base.replace("geometry", ogs_diameter_m=D / 100)).pdte for D in (20, 60, 100)}

for preset in DETECTORS:
    for proto in ("tf", "mp"):
        row = []
        for D, pdte in pdtes.items():
            cfg = base.replace("geometry", ogs_diameter_m=D / 100).replace("protocol", name=proto)
            k = keyrate_from_pdte(cfg.replace("detector", preset=preset), pdte, pdte).mu_scan.optimum
            row.append(f"{D} cm {k.rate_bps:8.2f}")
        print(f"{preset:11s} {proto}: " + " | ".join(row) + "  (bit/s)")
