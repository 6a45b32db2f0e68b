"""Quorum-certificate authenticator schemes.

Two interchangeable implementations of the same 2f+1 threshold semantics:

* :class:`HmacAuthenticator`: deterministic keyed-MAC scheme for
  reproducible simulation. Each node holds an HMAC key derived from a
  cluster seed; a certificate records the explicit signer set plus a
  binding hash over the shares.
* :class:`Ed25519Authenticator`: real asymmetric signatures (one keypair
  per node); the certificate aggregates the individual signatures.

Both enforce: exactly 2f+1 shares, distinct signers, one event digest.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from abc import ABC, abstractmethod
from typing import Iterable

from .types import Certificate, Digest, PartialSignature


class AggregationError(ValueError):
    """Shares handed to aggregate() do not form a valid quorum."""


class Authenticator(ABC):
    """Signs event digests and aggregates shares into quorum certificates."""

    def __init__(self, n: int, f: int):
        if n != 3 * f + 1:
            raise ValueError(f"cluster size must satisfy n = 3f+1, got n={n} f={f}")
        self.n = n
        self.f = f
        self.quorum = 2 * f + 1
        self._verified_certs: dict[tuple, bool] = {}

    @abstractmethod
    def partial_sign(self, signer: int, event_digest: Digest) -> PartialSignature: ...

    @abstractmethod
    def verify_partial(self, ps: PartialSignature) -> bool: ...

    @abstractmethod
    def _combine(self, event_digest: Digest, shares: list[PartialSignature]) -> bytes: ...

    @abstractmethod
    def _verify_aggregate(self, cert: Certificate) -> bool: ...

    def aggregate(self, event_digest: Digest, partials: Iterable[PartialSignature]) -> Certificate:
        shares = sorted(partials, key=lambda ps: ps.signer)
        signers = {ps.signer for ps in shares}
        if len(shares) != self.quorum or len(signers) != self.quorum:
            raise AggregationError(
                f"need exactly {self.quorum} shares from distinct signers, "
                f"got {len(shares)} ({len(signers)} distinct)"
            )
        for ps in shares:
            if ps.event_digest != event_digest:
                raise AggregationError("share signed over a different event digest")
            if not self.verify_partial(ps):
                raise AggregationError(f"invalid share from signer {ps.signer}")
        return Certificate(event_digest, frozenset(signers), self._combine(event_digest, shares))

    def verify_certificate(self, cert: Certificate) -> bool:
        key = (cert.event_digest, cert.signers_sorted(), cert.aggregate)
        cached = self._verified_certs.get(key)
        if cached is None:
            cached = (
                len(cert.signer_set) == self.quorum
                and all(0 <= s < self.n for s in cert.signer_set)
                and self._verify_aggregate(cert)
            )
            self._verified_certs[key] = cached
        return cached


class HmacAuthenticator(Authenticator):
    """Keyed-MAC shares with explicit signer accounting; fully deterministic."""

    def __init__(self, n: int, f: int, cluster_seed: bytes = b"phalanx-sim"):
        super().__init__(n, f)
        self._keys = [
            hashlib.sha256(cluster_seed + b"|node|" + struct.pack(">H", i)).digest()
            for i in range(n)
        ]

    def _mac(self, signer: int, event_digest: Digest) -> bytes:
        return hmac.new(self._keys[signer], event_digest, hashlib.sha256).digest()

    def partial_sign(self, signer: int, event_digest: Digest) -> PartialSignature:
        return PartialSignature(signer, event_digest, self._mac(signer, event_digest))

    def verify_partial(self, ps: PartialSignature) -> bool:
        if not 0 <= ps.signer < self.n:
            return False
        return hmac.compare_digest(ps.sig, self._mac(ps.signer, ps.event_digest))

    def _combine(self, event_digest: Digest, shares: list[PartialSignature]) -> bytes:
        h = hashlib.sha256(event_digest)
        for ps in shares:
            h.update(struct.pack(">H", ps.signer))
            h.update(ps.sig)
        return h.digest()

    def _verify_aggregate(self, cert: Certificate) -> bool:
        h = hashlib.sha256(cert.event_digest)
        for signer in cert.signers_sorted():
            h.update(struct.pack(">H", signer))
            h.update(self._mac(signer, cert.event_digest))
        return hmac.compare_digest(h.digest(), cert.aggregate)


class Ed25519Authenticator(Authenticator):
    """Per-node Ed25519 keys; the certificate concatenates the quorum's signatures."""

    SIG_SIZE = 64

    def __init__(self, n: int, f: int, cluster_seed: bytes = b"phalanx-sim"):
        super().__init__(n, f)
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

        self._private = []
        self._public = []
        for i in range(n):
            raw = hashlib.sha256(cluster_seed + b"|ed25519|" + struct.pack(">H", i)).digest()
            sk = Ed25519PrivateKey.from_private_bytes(raw)
            self._private.append(sk)
            self._public.append(sk.public_key())

    def partial_sign(self, signer: int, event_digest: Digest) -> PartialSignature:
        return PartialSignature(signer, event_digest, self._private[signer].sign(event_digest))

    def verify_partial(self, ps: PartialSignature) -> bool:
        from cryptography.exceptions import InvalidSignature

        if not 0 <= ps.signer < self.n:
            return False
        try:
            self._public[ps.signer].verify(ps.sig, ps.event_digest)
            return True
        except InvalidSignature:
            return False

    def _combine(self, event_digest: Digest, shares: list[PartialSignature]) -> bytes:
        return b"".join(ps.sig for ps in shares)

    def _verify_aggregate(self, cert: Certificate) -> bool:
        signers = cert.signers_sorted()
        if len(cert.aggregate) != self.SIG_SIZE * len(signers):
            return False
        for idx, signer in enumerate(signers):
            sig = cert.aggregate[idx * self.SIG_SIZE:(idx + 1) * self.SIG_SIZE]
            if not self.verify_partial(PartialSignature(signer, cert.event_digest, sig)):
                return False
        return True


def make_authenticator(scheme: str, n: int, f: int, cluster_seed: bytes = b"phalanx-sim") -> Authenticator:
    if scheme == "hmac":
        return HmacAuthenticator(n, f, cluster_seed)
    if scheme == "ed25519":
        return Ed25519Authenticator(n, f, cluster_seed)
    raise ValueError(f"unknown authenticator scheme: {scheme!r}")
