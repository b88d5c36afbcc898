import json

import pytest

from iotrisk.dataset import DeviceRecord
from iotrisk.nvd import RiskClass


def make_record(
    brand="brand_000",
    product_type="type_000",
    category="SmartHome",
    price_usd=49.99,
    protocols="wifi",
    data_storage="Remote",
    personal_information="Yes",
    location_track="No",
    communication_capability="wifi_2_4ghz",
    authorisation_encryption="Symmetric",
    risk_score=RiskClass.Low,
    synthetic=False,
) -> DeviceRecord:
    return DeviceRecord(
        brand=brand,
        product_type=product_type,
        category=category,
        price_usd=price_usd,
        protocols=protocols,
        data_storage=data_storage,
        personal_information=personal_information,
        location_track=location_track,
        communication_capability=communication_capability,
        authorisation_encryption=authorisation_encryption,
        risk_score=risk_score,
        synthetic=synthetic,
    )


def feed_item(cve_id="CVE-2019-0001", base_score=9.8, cpe_uris=None,
              description="smart_camera buffer overflow", published="2019-03-01T10:00Z"):
    item = {
        "cve": {
            "CVE_data_meta": {"ID": cve_id},
            "description": {
                "description_data": [{"lang": "en", "value": description}]
            },
        },
        "configurations": {
            "nodes": [
                {
                    "cpe_match": [
                        {"vulnerable": True, "cpe23Uri": uri}
                        for uri in (cpe_uris or [])
                    ]
                }
            ]
        },
        "publishedDate": published,
    }
    if base_score is not None:
        item["impact"] = {"baseMetricV3": {"cvssV3": {"baseScore": base_score}}}
    else:
        item["impact"] = {}
    return item


def feed_document(items) -> str:
    return json.dumps({"CVE_data_type": "CVE", "CVE_Items": items})


@pytest.fixture
def record_factory():
    return make_record
