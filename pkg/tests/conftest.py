import json

import pytest

from multirep.chunker import ChunkPlan
from multirep.classifier import ModelConfig
from multirep.encoder import EncoderConfig


@pytest.fixture(scope="session")
def tiny_encoder_cfg():
    return EncoderConfig(layers=2, hidden_dim=32, max_positions=512, vocab=512, heads=4)


@pytest.fixture(scope="session")
def tiny_model_cfg(tiny_encoder_cfg):
    return ModelConfig(
        content_encoder=tiny_encoder_cfg,
        context_encoder=tiny_encoder_cfg,
        chunk_plan=ChunkPlan(window=500, overlap=50, max_chunks=4),
        head_hidden=64,
    )


def write_article(article_dir, text="Some body text.", title="A title", url=None,
                  authors=None, tweets=None, retweets=None, filename="news content.json"):
    """Materialise one article directory in the per-article tree layout."""
    article_dir.mkdir(parents=True)
    record = {
        "text": text,
        "title": title,
        "url": url or "https://news.example.com/story",
        "authors": authors or [],
    }
    (article_dir / filename).write_text(json.dumps(record))
    for i, tweet in enumerate(tweets or []):
        tweets_dir = article_dir / "tweets"
        tweets_dir.mkdir(exist_ok=True)
        (tweets_dir / f"{i}.json").write_text(json.dumps(tweet))
    for i, entries in enumerate(retweets or []):
        rt_dir = article_dir / "retweets"
        rt_dir.mkdir(exist_ok=True)
        (rt_dir / f"{i}.json").write_text(json.dumps({"retweets": entries}))


@pytest.fixture
def news_tree(tmp_path):
    """Small two-class article tree: 3 usable fake, 2 usable real, 2 dropped."""
    root = tmp_path / "fnn"
    domain = root / "politifact"
    for i in range(3):
        write_article(
            domain / "fake" / f"politifact_f{i}",
            text=f"Fake body {i}.",
            title=f"Fake {i}",
            url="https://web.archive.org/web/20200101000000/https://orig.example.com/a",
            authors=["Jane Doe", "John Roe"],
            tweets=[
                {"text": "same tweet", "user": {"screen_name": "u1"}},
                {"text": "same tweet", "user": {"screen_name": "u2"}},
                {"text": "other tweet", "user": {"screen_name": "u3"}},
            ],
            retweets=[[{"id": 1}, {"id": 2}], [{"id": 3}]],
        )
    for i in range(2):
        write_article(domain / "real" / f"politifact_r{i}", text=f"Real body {i}.",
                      title=f"Real {i}")
    # dropped: empty body / no article file at all
    write_article(domain / "fake" / "politifact_empty", text="   ")
    (domain / "real" / "politifact_missing").mkdir(parents=True)
    return root
