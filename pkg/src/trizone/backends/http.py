"""HTTP client for remote model servers."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from typing import Callable

import requests

from ..errors import BackendTimeout, ProtocolError, RemoteFailure
from ..maskcore import BinaryMask, LabelMap, RgbImage, TriZoneMask
from . import wire
from .base import (
    Backend,
    BackendEndpoint,
    JudgeVerdict,
    Provenance,
    TryOnRequest,
    check_inpaint_args,
    check_prompt,
    parse_verdict,
)

log = logging.getLogger(__name__)


class HttpBackend(Backend):
    """POSTs JSON payloads to ``base_url + path``.

    Timeouts, connection errors and 5xx responses are retried up to
    ``retry_limit`` times with exponential backoff; 4xx responses fail at once.
    The request body is serialized once, so every retry sends identical bytes
    with the same ``Idempotency-Key``.
    """

    kind = "remote"

    def __init__(self, endpoint: BackendEndpoint, backoff: float = 0.05):
        super().__init__()
        self.config = endpoint
        self.endpoint = endpoint.base_url.rstrip("/")
        self.backoff = backoff
        self._slots = threading.BoundedSemaphore(endpoint.max_in_flight)
        self._local = threading.local()

    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = self._local.session = requests.Session()
        return session

    def _post(self, capability: str, payload: dict, key: str | None) -> dict:
        body = json.dumps(payload, separators=(",", ":"), sort_keys=True).encode("utf-8")
        headers = {
            "Content-Type": "application/json",
            "Idempotency-Key": key or hashlib.sha256(body).hexdigest(),
        }
        if self.config.auth_token:
            headers["Authorization"] = f"Bearer {self.config.auth_token}"
        url = self.endpoint + wire.PATHS[capability]
        attempts = self.config.retry_limit + 1
        start = time.perf_counter()
        last: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._session().post(url, data=body, headers=headers, timeout=self.config.timeout)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last = BackendTimeout(f"{url}: {exc.__class__.__name__} after {attempt + 1} attempt(s)")
                log.debug("attempt %d/%d to %s failed: %s", attempt + 1, attempts, url, exc)
                continue
            if resp.status_code >= 500:
                last = RemoteFailure(f"{url}: HTTP {resp.status_code} after {attempt + 1} attempt(s)")
                continue
            if resp.status_code >= 400:
                raise RemoteFailure(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                data = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{url}: response is not JSON") from exc
            if self.on_result is not None:
                self.on_result(Provenance(self.kind, self.endpoint, capability, time.perf_counter() - start, attempt + 1))
            return data
        assert last is not None
        raise last

    def _call(self, capability: str, payload: dict, key: str | None, decode: Callable[[dict], object]):
        return decode(self._post(capability, payload, key))

    def tryon(self, req: TryOnRequest, key: str | None = None) -> RgbImage:
        out = self._call("tryon", wire.tryon_request(req), key, wire.read_image_response)
        return _same_grid(out, req.model_image)

    def inpaint(self, image: RgbImage, region: BinaryMask, key: str | None = None) -> RgbImage:
        check_inpaint_args(image, region)
        out = self._call("inpaint", wire.inpaint_request(image, region), key, wire.read_image_response)
        return _same_grid(out, image)

    def parse_human(self, image: RgbImage, key: str | None = None) -> LabelMap:
        out = self._call("parse", wire.image_request(image), key, wire.read_labels_response)
        return _same_grid(out, image)

    def densepose(self, image: RgbImage, key: str | None = None) -> LabelMap:
        out = self._call("densepose", wire.image_request(image), key, wire.read_labels_response)
        return _same_grid(out, image)

    def predict_trizone(self, model_image: RgbImage, garment_image: RgbImage, key: str | None = None) -> TriZoneMask:
        out = self._call(
            "trizone", wire.trizone_request(model_image, garment_image), key, wire.read_trizone_response
        )
        return _same_grid(out, model_image)

    def judge(self, triptych: RgbImage, prompt: str, key: str | None = None) -> JudgeVerdict:
        check_prompt(prompt)
        reply = self._call("judge", wire.judge_request(triptych, prompt), key, wire.read_judge_response)
        return parse_verdict(reply)


def _same_grid(result, reference: RgbImage):
    if result.grid != reference.grid:
        raise ProtocolError(f"server returned a {result.grid} raster for a {reference.grid} input")
    return result

