"""Walk the ingestion stage: parse an NVD JSON 1.1 feed document, map CVSS
base scores onto severity classes, filter for IoT device categories, and
emit device candidate rows awaiting manual enrichment.

Run: python demos/01_feed_ingestion.py
"""

import json

from iotrisk.dataset import default_rules_path
from iotrisk.nvd import (
    candidate_devices,
    filter_by_year,
    filter_iot,
    load_rules,
    parse_feed,
    severity_class,
)

FEED = {
    "CVE_data_type": "CVE",
    "CVE_Items": [
        {
            "cve": {
                "CVE_data_meta": {"ID": "CVE-2019-1001"},
                "description": {"description_data": [
                    {"lang": "en", "value": "Stack overflow in smart camera web UI."}
                ]},
            },
            "configurations": {"nodes": [{"cpe_match": [
                {"vulnerable": True,
                 "cpe23Uri": "cpe:2.3:h:lenshawk:smart_camera:1.2:*:*:*:*:*:*:*"},
                {"vulnerable": True,
                 "cpe23Uri": "cpe:2.3:o:lenshawk:camera_fw:1.2:*:*:*:*:*:*:*"},
            ]}]},
            "impact": {"baseMetricV3": {"cvssV3": {"baseScore": 9.8}}},
            "publishedDate": "2019-06-12T14:29Z",
        },
        {
            "cve": {
                "CVE_data_meta": {"ID": "CVE-2020-2002"},
                "description": {"description_data": [
                    {"lang": "en", "value": "Auth bypass in home router admin page."}
                ]},
            },
            "configurations": {"nodes": [{"cpe_match": [
                {"vulnerable": True,
                 "cpe23Uri": "cpe:2.3:o:netforge:router_os:4.0:*:*:*:*:*:*:*"},
            ]}]},
            "impact": {"baseMetricV3": {"cvssV3": {"baseScore": 6.5}}},
            "publishedDate": "2020-02-03T09:00Z",
        },
        {
            # no CVSS v3 block: counted and skipped
            "cve": {
                "CVE_data_meta": {"ID": "CVE-2019-3003"},
                "description": {"description_data": [
                    {"lang": "en", "value": "Legacy entry scored only under v2."}
                ]},
            },
            "configurations": {"nodes": []},
            "impact": {},
            "publishedDate": "2019-01-01T00:00Z",
        },
    ],
}


def main():
    result = parse_feed(json.dumps(FEED))
    print(f"feed items: {len(FEED['CVE_Items'])}, scored entries: "
          f"{len(result.entries)}, skipped (no v3 score): {result.skipped}")
    for entry in result.entries:
        cls = severity_class(entry.cvss_v3_base)
        print(f"  {entry.cve_id}: base {entry.cvss_v3_base} -> {cls.name}, "
              f"{len(entry.cpe_uris)} CPE identities")

    entries = filter_by_year(result.entries, 2013)
    rules = load_rules(default_rules_path())
    matched = filter_iot(entries, rules)
    print(f"\nafter the category rules ({len(rules)} rules): "
          f"{len(matched)} entries kept")
    for entry, category in matched:
        print(f"  {entry.cve_id} -> {category}")

    rows = candidate_devices(matched)
    print(f"\ncandidate device rows (one per distinct vendor/product):")
    for row in rows:
        filled = {k: v for k, v in row.items() if v}
        print(f"  {filled}")
    print("\nEnrichment fields (price, protocols, ...) stay empty until a "
          "human completes them; `iotrisk build` then validates the corpus.")


if __name__ == "__main__":
    main()
