#!/usr/bin/env python3
# Copyright 2026 The mcetk Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http:#www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Freezes the two-document TF-IDF topic fixture with an independent
implementation of the candidate-term and weighting rules.

Candidates: every CJK character and adjacent CJK pair inside a CJK run, plus
lowercased Latin words of two or more letters. The fixture avoids stopwords,
so no stop lists are needed here. tf = count / candidates in the document,
idf = ln((1 + N) / (1 + df)) + 1.
Usage: freeze_tfidf_fixture.py <out.json>
"""
import json
import math
import re
import sys

DOCS = {
    "doc-a": "餐廳 menu 食 點心\n餐廳 menu 食 叉燒\n",
    "doc-b": "餐廳 menu 食 牛扒\n餐廳 menu 食 薯條\n",
}
K = 5


def candidates(text):
    terms = []
    for run in re.findall(r"[一-鿿]+", text):
        for i, ch in enumerate(run):
            terms.append(ch)
            if i + 1 < len(run):
                terms.append(run[i:i + 2])
    terms += [w.lower() for w in re.findall(r"[A-Za-z]{2,}", text)]
    return terms


def main():
    n = len(DOCS)
    counts = {d: {} for d in DOCS}
    for d, text in DOCS.items():
        for t in candidates(text):
            counts[d][t] = counts[d].get(t, 0) + 1
    df = {}
    for d in DOCS:
        for t in counts[d]:
            df[t] = df.get(t, 0) + 1
    weights = {}
    for d in DOCS:
        total = sum(counts[d].values())
        weights[d] = {t: c / total * (math.log((1 + n) / (1 + df[t])) + 1) for t, c in counts[d].items()}
    summed = {}
    for d in DOCS:
        for t, w in weights[d].items():
            summed[t] = summed.get(t, 0.0) + w
    # Python compares str by code point, which matches UTF-8 byte order.
    ranked = sorted(summed.items(), key=lambda kv: (-kv[1], kv[0]))[:K]
    out = {"documents": DOCS, "k": K, "weights": weights,
           "topic_keywords": [t for t, _ in ranked]}
    with open(sys.argv[1], "w", encoding="utf-8") as f:
        json.dump(out, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
