"""Writes the synthetic daily rainfall fixture used by the decluster tests."""
import datetime as dt
import random

rng = random.Random(20240501)
stations = ["A", "B", "C"]
rows = []
for year in range(1980, 2004):
    day = dt.date(year, 5, 1)
    end = dt.date(year, 9, 30)
    storm_left = 0
    while day <= end:
        if storm_left == 0 and rng.random() < 0.05:
            storm_left = rng.choice([1, 1, 1, 2, 2, 3])
        in_storm = storm_left > 0
        for s in stations:
            if in_storm and rng.random() < 0.75:
                v = 22.0 + rng.expovariate(1 / 14.0)
            elif rng.random() < 0.4:
                v = rng.expovariate(1 / 4.0)
            else:
                v = 0.0
            missing = (year == 1990 and s == "B" and 150 <= day.timetuple().tm_yday < 172) or (
                year == 1995 and s == "C" and 200 <= day.timetuple().tm_yday < 210)
            rows.append((s, day.isoformat(), "" if missing else f"{v:.1f}"))
        storm_left = max(0, storm_left - 1)
        day += dt.timedelta(days=1)

rows.sort()
with open("daily_fixture.csv", "w") as f:
    f.write("station,date,precip_mm\n")
    for r in rows:
        f.write(",".join(r) + "\n")
