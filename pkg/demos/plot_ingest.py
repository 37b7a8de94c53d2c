"""
Getting data in: pageviews and CSV
==================================

Aggregate pageviews for a Wikimedia project come from the public REST API
and are cached on disk, so a second run makes no requests.  Referrer-split
or geography-split series are not public; those come in as CSV with one
``date`` column and one column per series.

Pass ``--online`` to hit the real API; by default the demo only builds the
request and round-trips a CSV file.
"""

import sys

import numpy as np

from impact_bsts.ingest import PageviewClient, PageviewQuery, load_csv, write_csv
from impact_bsts.series import DateIndexedSeries, align

from _common import OUTPUT

query = PageviewQuery("de.wikipedia", "2023-01-01", "2023-03-31")
print("request:", query.url())

if "--online" in sys.argv:
    client = PageviewClient(cache_dir=OUTPUT / "cache")
    views = client.fetch_aggregate(query)
    print(f"{views.name}: {len(views)} days, mean {np.nanmean(views.values):,.0f} views/day")
    client.fetch_aggregate(query)
    print(f"network calls {client.network_calls}, cache hits {client.cache_hits}")

###############################################################################
# CSV round trip.  Empty cells are missing values; the panel builder
# interpolates short gaps in controls and aligns everything on common dates.
rng = np.random.default_rng(0)
treated = DateIndexedSeries("referrer_search", "2023-01-01", 1000 + rng.normal(0, 20, 90))
other = 500 + rng.normal(0, 10, 90)
other[5] = np.nan
control = DateIndexedSeries("other_wiki", "2023-01-10", other)
path = OUTPUT / "series.csv"
write_csv(align([treated, control]), path)
loaded = load_csv(path)
print([(s.name, s.start_date.isoformat(), len(s)) for s in loaded])
