"""Generate the bundled 178-tract synthetic city.

One latent neighborhood-deprivation factor drives the features, with
loadings chosen so the rank correlations against the obesity outcome land
in the documented ordering (physical inactivity strongest, supermarket
access and crime weakest) and the insurance column is collinear enough
with poverty and unemployment to trip the VIF filter exactly once.

Tract 47157010300 is planted with the demo values used throughout the
docs (49% inactivity, 21% without a diploma, 60.8% poverty, 46% obesity).

Output is frozen into src/upho/data/demo/; rerunning reproduces the same
bytes from the fixed seed.
"""

from __future__ import annotations

import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "src" / "upho" / "data" / "demo"

N = 178
SEED = 20220720

PLANT_CODE = "47157010300"
# Supermarket access sits below the city mean so its contribution to the
# planted tract's prediction comes out negative in the walkthrough.
PLANT = {
    "obesity_prev": 46.0,
    "lack_physical_activity": 49.0,
    "no_insurance": 23.5,
    "low_supermarket_access": 820.0,
    "black_pct": 92.0,
    "poverty_pct": 60.8,
    "unemployment_pct": 18.3,
    "no_hs_diploma_pct": 21.0,
    "crime_rate": 410.0,
}

# (loading on latent factor, target mean, target sd, clip_lo, clip_hi)
FEATURES = {
    "lack_physical_activity": (0.95, 36.16, 9.80, 5.0, 70.0),
    "poverty_pct": (0.88, 28.65, 16.28, 0.5, 85.0),
    "no_hs_diploma_pct": (0.84, 10.38, 6.59, 0.3, 45.0),
    "black_pct": (0.80, 63.17, 32.70, 0.5, 99.5),
    "unemployment_pct": (0.75, 15.73, 9.31, 0.4, 60.0),
    "low_supermarket_access": (0.40, 1382.20, 1083.37, 0.0, 6000.0),
    "crime_rate": (0.40, 350.20, 226.26, 0.0, 1400.0),
}

OBESITY_WEIGHTS = {
    "lack_physical_activity": 0.62,
    "poverty_pct": 0.22,
    "no_hs_diploma_pct": 0.16,
    "black_pct": 0.11,
    "unemployment_pct": 0.08,
    "low_supermarket_access": 0.02,
    "crime_rate": 0.02,
}
OBESITY_NOISE = 0.10
OBESITY_MEAN, OBESITY_SD = 37.50, 7.84

HEALTH_COLUMNS = ["obesity_prev", "lack_physical_activity", "no_insurance"]
SDOH_COLUMNS = [
    "low_supermarket_access",
    "black_pct",
    "poverty_pct",
    "unemployment_pct",
    "no_hs_diploma_pct",
    "crime_rate",
]


def standardized(v: np.ndarray) -> np.ndarray:
    return (v - v.mean()) / v.std(ddof=1)


def main() -> None:
    rng = np.random.default_rng(SEED)
    z = rng.normal(size=N)

    latent: dict[str, np.ndarray] = {}
    for name, (loading, *_rest) in FEATURES.items():
        noise = rng.normal(size=N)
        latent[name] = loading * z + np.sqrt(1.0 - loading**2) * noise

    # Insurance is nearly a poverty/unemployment combination, so its VIF
    # blows past 10 while everything else stays below.
    ins = 0.70 * latent["poverty_pct"] + 0.50 * latent["unemployment_pct"]
    ins = ins + 0.15 * rng.normal(size=N)
    latent["no_insurance"] = standardized(ins)

    core = sum(w * latent[name] for name, w in OBESITY_WEIGHTS.items())
    core = core + OBESITY_NOISE * rng.normal(size=N)
    latent["obesity_prev"] = standardized(core)

    columns: dict[str, np.ndarray] = {}
    for name, (_loading, mean, sd, lo, hi) in FEATURES.items():
        columns[name] = np.clip(standardized(latent[name]) * sd + mean, lo, hi)
    columns["no_insurance"] = np.clip(latent["no_insurance"] * 6.78 + 20.21, 1.0, 60.0)
    columns["obesity_prev"] = np.clip(
        latent["obesity_prev"] * OBESITY_SD + OBESITY_MEAN, 12.0, 65.0
    )

    codes = [f"47157{100 * (i + 1):06d}" for i in range(N)]
    plant_row = codes.index(PLANT_CODE)
    for name, value in PLANT.items():
        columns[name][plant_row] = value

    for name in columns:
        columns[name] = np.round(columns[name], 1)

    OUT.mkdir(parents=True, exist_ok=True)

    def write_csv(path: pathlib.Path, names: list[str]) -> None:
        lines = ["geo_code," + ",".join(names)]
        for i, code in enumerate(codes):
            lines.append(code + "," + ",".join(f"{columns[n][i]:.1f}" for n in names))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    write_csv(OUT / "health.csv", HEALTH_COLUMNS)
    write_csv(OUT / "sdoh.csv", SDOH_COLUMNS)

    # Crosswalk: contiguous blocks of tracts per zip; 38127 holds exactly
    # the 8 tracts ending at the planted one.
    zips = [
        "38103", "38104", "38105", "38106", "38107", "38108", "38109",
        "38111", "38112", "38114", "38115", "38116", "38117", "38118",
        "38119", "38122", "38126", "38128", "38141", "38152", "38153",
    ]
    special_lo, special_hi = 95, 103  # rows for codes 9600..10300 -> zip 38127
    assignments: list[str] = [""] * N
    for j in range(special_lo, special_hi):
        assignments[j] = "38127"
    block = 0
    pending = 0
    zip_code = zips[0]
    for i in range(N):
        if assignments[i]:
            continue
        if pending == 0:
            zip_code = zips[block % len(zips)]
            pending = 8 + (block % 4)
            block += 1
        assignments[i] = zip_code
        pending -= 1
    lines = ["zip,tract_fips"]
    for i, code in enumerate(codes):
        lines.append(f"{assignments[i]},{code}")
    (OUT / "crosswalk.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    manifest_health = """# column_name\tterm\tunits\tdescription
obesity_prev\tHIO:%ObesityPrevalence\tpercent\tCrude obesity prevalence among adults
lack_physical_activity\tHIO:%PopWLackOfPhysicalActivity\tpercent\tCrude prevalence of lack of physical activity among adults
no_insurance\tHIO:%NoHealthInsurance\tpercent\tCrude prevalence of adults without health insurance
"""
    manifest_sdoh = """# column_name\tterm\tunits\tdescription
low_supermarket_access\tHIO:LowSupermarketAccess\tcount\tLow-income population more than half a mile from a supermarket
black_pct\tHIO:%Black\tpercent\tShare of population that is Black or African American
poverty_pct\tHIO:%UnderPovertyLine\tpercent\tShare of population below the federal poverty line
unemployment_pct\tHIO:%Unemployed\tpercent\tShare of population unemployed
no_hs_diploma_pct\tHIO:%PopNoHighSchoolDiploma\tpercent\tShare of adults 25+ without a high school diploma
crime_rate\tHIO:CrimeRatePer1000\trate_per_1000\tCrimes per thousand residents
"""
    (OUT / "health.manifest.tsv").write_text(manifest_health, encoding="utf-8")
    (OUT / "sdoh.manifest.tsv").write_text(manifest_sdoh, encoding="utf-8")

    # Quick report so regenerating shows whether the targets still hold.
    from scipy.stats import spearmanr

    y = columns["obesity_prev"]
    print("spearman vs obesity:")
    for name in list(FEATURES) + ["no_insurance"]:
        rho = spearmanr(columns[name], y).statistic
        print(f"  {name:<26s} {rho:.3f}")


if __name__ == "__main__":
    main()
