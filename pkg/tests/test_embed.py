import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monrec.embed import EmbeddingProvider, EmbeddingTransportError, cosine, embed_set, hashed_embedding

# near-paraphrase pairs of monitoring vocabulary
SYNONYMS = [
    ("cpu utilization percent", "CPU utilisation percentage"),
    ("memory used bytes", "bytes of memory used"),
    ("disk read latency", "latency of disk reads"),
    ("http 5xx error count", "count of HTTP 5xx errors"),
    ("request throughput per second", "requests per second throughput"),
    ("queue depth", "depth of the queue"),
    ("network bytes received", "received network bytes"),
    ("network bytes sent", "sent network bytes"),
    ("garbage collection pause time", "gc pause time for garbage collection"),
    ("thread pool saturation", "saturation of thread pool"),
    ("database connection count", "count of database connections"),
    ("cache hit ratio", "ratio of cache hits"),
    ("cache eviction rate", "rate of cache evictions"),
    ("heap memory usage", "usage of heap memory"),
    ("open file descriptors", "file descriptors open"),
    ("socket timeout errors", "errors from socket timeouts"),
    ("replication lag seconds", "seconds of replication lag"),
    ("consumer offset lag", "lag of consumer offset"),
    ("api gateway latency p99", "p99 latency at the api gateway"),
    ("login failure count", "count of login failures"),
    ("checkout conversion rate", "conversion rate at checkout"),
    ("payment declined total", "total declined payments"),
    ("container restart count", "count of container restarts"),
    ("pod memory limit", "memory limit of pod"),
    ("load balancer healthy hosts", "healthy hosts behind load balancer"),
    ("dns resolution time", "time for dns resolution"),
    ("tls handshake failures", "failures of tls handshakes"),
    ("battery temperature celsius", "temperature of battery in celsius"),
    ("fan speed rpm", "rpm of fan speed"),
    ("power draw watts", "watts of power drawn"),
    ("inode usage ratio", "ratio of inodes used"),
    ("swap space used", "used swap space"),
    ("io wait percentage", "percentage of io wait"),
    ("context switches per second", "per second context switches"),
    ("message publish rate", "rate of published messages"),
    ("dead letter queue size", "size of dead letter queue"),
    ("lambda cold starts", "cold starts of lambda"),
    ("function invocation errors", "errors in function invocations"),
    ("search query duration", "duration of search queries"),
    ("index refresh time", "time of index refresh"),
    ("upload bandwidth megabits", "megabits of upload bandwidth"),
    ("video buffering ratio", "ratio of video buffering"),
    ("active user sessions", "sessions of active users"),
    ("shopping cart abandonment", "abandonment of shopping carts"),
    ("order fulfillment delay", "delay in order fulfillment"),
    ("sensor humidity reading", "humidity reading from sensor"),
    ("gpu memory utilization", "utilization of gpu memory"),
    ("model inference latency", "latency of model inference"),
    ("batch job duration", "duration of batch jobs"),
    ("certificate expiry days", "days until certificate expiry"),
]


def test_empty_text_is_zero_vector():
    assert not hashed_embedding("").any()
    assert not hashed_embedding("   \t").any()
    assert not EmbeddingProvider(width=32).embed_text("").any()


def test_unit_norm_and_width():
    v = hashed_embedding("Raw RAM utilization in MBs", 64)
    assert v.shape == (64,)
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_deterministic_and_whitespace_case_insensitive():
    a = hashed_embedding("Disk Read  Latency")
    np.testing.assert_array_equal(a, hashed_embedding("disk read latency"))
    p1, p2 = EmbeddingProvider(), EmbeddingProvider()
    np.testing.assert_array_equal(p1.embed_text("queue depth"), p2.embed_text("queue depth"))


def test_cache_returns_same_readonly_vector():
    p = EmbeddingProvider(width=16)
    v = p.embed_text("cpu")
    assert p.embed_text("cpu") is v
    with pytest.raises(ValueError):
        v[0] = 1.0


def test_synonym_pairs_retrieve_each_other():
    p = EmbeddingProvider()
    left = p.embed_many([a for a, _ in SYNONYMS])
    right = p.embed_many([b for _, b in SYNONYMS])
    sims = np.array([[cosine(a, b) for b in right] for a in left])
    hits = np.mean(np.argmax(sims, axis=1) == np.arange(len(SYNONYMS)))
    assert hits >= 0.9
    assert np.mean(np.diag(sims)) > np.mean(sims[~np.eye(len(SYNONYMS), dtype=bool)]) + 0.3


def test_cosine_conventions():
    assert cosine(np.zeros(3), np.ones(3)) == 0.0
    assert cosine(np.ones(3), 2 * np.ones(3)) == pytest.approx(1.0)
    assert cosine(np.array([1.0, 0]), np.array([-1.0, 0])) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        cosine(np.ones(3), np.ones(4))


def test_embed_set_rules():
    assert not embed_set([], width=5).any()
    with pytest.raises(ValueError):
        embed_set([])
    with pytest.raises(ValueError):
        embed_set([np.ones(3), np.ones(4)])
    with pytest.raises(ValueError):
        embed_set([np.ones(3)], width=4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.text(min_size=1, max_size=20), min_size=1, max_size=6), st.randoms(use_true_random=False))
def test_embed_set_is_order_invariant_mean(texts, rnd):
    vecs = [hashed_embedding(t, 32) for t in texts]
    shuffled = list(vecs)
    rnd.shuffle(shuffled)
    np.testing.assert_allclose(embed_set(vecs), embed_set(shuffled), atol=1e-12)
    np.testing.assert_allclose(embed_set(vecs), np.mean(vecs, axis=0), atol=1e-12)


def test_external_provider_falls_back(monkeypatch):
    import requests

    def boom(*a, **k):
        raise requests.ConnectionError("down")

    monkeypatch.setattr(requests, "post", boom)
    p = EmbeddingProvider(width=32, mode="external", endpoint="http://127.0.0.1:9/embed")
    np.testing.assert_array_equal(p.embed_text("cpu load"), hashed_embedding("cpu load", 32))
    strict = EmbeddingProvider(width=32, mode="external", endpoint="http://127.0.0.1:9/embed", allow_fallback=False)
    with pytest.raises(EmbeddingTransportError):
        strict.embed_text("cpu load")


def test_external_provider_width_checked(monkeypatch):
    import requests

    class Resp:
        def raise_for_status(self):
            pass

        def json(self):
            return {"vectors": [[1.0, 0.0]]}

    monkeypatch.setattr(requests, "post", lambda *a, **k: Resp())
    p = EmbeddingProvider(width=4, mode="external", endpoint="http://x", allow_fallback=False)
    with pytest.raises(EmbeddingTransportError, match="width"):
        p.embed_text("cpu")
