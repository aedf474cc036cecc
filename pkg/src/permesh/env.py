"""The standard simulated environment: native permissions, the native API
table, and the bundled proxy descriptors."""

from __future__ import annotations

import json
from importlib import resources

from .proxies import ProxyDescriptor

INTERNET = "android.permission.INTERNET"
ACCESS_NETWORK_STATE = "android.permission.ACCESS_NETWORK_STATE"
WRITE_EXTERNAL_STORAGE = "android.permission.WRITE_EXTERNAL_STORAGE"
WAKE_SCREEN = "android.permission.WAKE_SCREEN"
RING_DEVICE = "android.permission.RING_DEVICE"
RECORD_AUDIO = "android.permission.RECORD_AUDIO"
BLUETOOTH = "android.permission.BLUETOOTH"

DOMAIN_SELECTIVE = "org.proxy.net.DOMAIN_SELECTIVE_INTERNET"
SELECTIVE_SD_CARD = "org.proxy.fs.SELECTIVE_SD_CARD"
COLLECT_USAGE_STATISTICS = "org.proxy.stats.COLLECT_USAGE_STATISTICS"
ACT_AS_A_PHONE = "org.proxy.phone.ACT_AS_A_PHONE"

NATIVE_PERMISSIONS = [
    (INTERNET, "full access to the Internet", "Open network connections to any host."),
    (ACCESS_NETWORK_STATE, "view network state", "See whether the device is connected."),
    (WRITE_EXTERNAL_STORAGE, "modify or delete SD card contents",
     "Read and write anywhere on the SD card."),
    (WAKE_SCREEN, "wake the screen", "Turn the screen on."),
    (RING_DEVICE, "ring the device", "Play the ringtone."),
    (RECORD_AUDIO, "record audio", "Capture sound from the microphone."),
    (BLUETOOTH, "use Bluetooth", "Route audio to Bluetooth devices."),
]

# native API operation id -> the native permission that covers it
NATIVE_API_TABLE = {
    "net.socket": INTERNET,
    "net.state": ACCESS_NETWORK_STATE,
    "fs.sdcard": WRITE_EXTERNAL_STORAGE,
    "device.wake_screen": WAKE_SCREEN,
    "device.ring": RING_DEVICE,
    "audio.record": RECORD_AUDIO,
    "bluetooth.route": BLUETOOTH,
}

_PROXY_FILES = [
    "domain_selective.json",
    "selective_sdcard.json",
    "collect_usage_statistics.json",
    "act_as_a_phone.json",
]


def load_standard_proxies() -> list[ProxyDescriptor]:
    out = []
    for name in _PROXY_FILES:
        text = (resources.files("permesh") / "data" / "proxies" / name).read_text("utf-8")
        out.append(ProxyDescriptor.from_dict(json.loads(text)))
    return out


def load_proxy_file(path: str) -> ProxyDescriptor:
    with open(path, encoding="utf-8") as fh:
        return ProxyDescriptor.from_dict(json.load(fh))
