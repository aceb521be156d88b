"""Convert the Orange3 copy of the UCI Cleveland heart-disease table into the
integer-coded layout used by the test fixtures (tests/data/heart.csv).

Usage: python tools/make_heart_csv.py heart_disease.tab tests/data/heart.csv
Missing `ca` values are coded as 4 and missing `thal` values as 0.
"""
import csv
import sys

CP = {"typical ang": 0, "atypical ang": 1, "non-anginal": 2, "asymptomatic": 3}
ECG = {"normal": 0, "ST-T abnormal": 1, "left vent hypertrophy": 2}
SLOPE = {"upsloping": 0, "flat": 1, "downsloping": 2}
THAL = {"?": 0, "fixed defect": 1, "normal": 2, "reversable defect": 3}
HEADER = ["age", "sex", "cp", "trestbps", "chol", "fbs", "restecg", "thalach",
          "exang", "oldpeak", "slope", "ca", "thal", "target"]


def main(src, dst):
    with open(src, encoding="utf-8") as f:
        rows = [line.rstrip("\n").split("\t") for line in f][3:]
    with open(dst, "w", newline="", encoding="utf-8") as f:
        out = csv.writer(f, lineterminator="\n")
        out.writerow(HEADER)
        for r in rows:
            age, sex, cp, bps, chol, fbs, ecg, hr, ang, st, slope, ca, thal, y = r
            out.writerow([
                int(float(age)), 1 if sex == "male" else 0, CP[cp], int(float(bps)),
                int(float(chol)), int(fbs), ECG[ecg], int(float(hr)), int(ang), st,
                SLOPE[slope], 4 if ca == "?" else int(float(ca)), THAL[thal],
                "diseased" if y == "1" else "healthy"])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
