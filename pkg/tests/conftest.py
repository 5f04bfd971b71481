import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shapeik.skeleton import default_template


@pytest.fixture(scope="session")
def template():
    return default_template()


@pytest.fixture()
def rng():
    return np.random.default_rng(2024)


@pytest.fixture(scope="session")
def toy_model(template):
    """Small, quickly trained model for behavioral tests; quality is not the
    point, only that it is a real trained artifact."""
    from shapeik.ik import TrainConfig, train

    config = TrainConfig(
        dataset_size=300, steps=120, batch_size=16, seed=11,
        token_dim=32, token_layers=2, decoder_width=64, decoder_blocks=2,
        eval_size=8, eval_every=60,
    )
    model, trace = train(template, config)
    return model, config, trace


@pytest.fixture(scope="session")
def small_bank(template):
    from shapeik.inversion import build_shape_bank

    return build_shape_bank(template, size=4000, seed=5)


@pytest.fixture(scope="session")
def service_artifacts(tmp_path_factory, template, toy_model, small_bank):
    """Checkpoint + bank files as a service would load them."""
    from shapeik.ik import save_model
    from shapeik.inversion import save_bank

    model, _, _ = toy_model
    d = tmp_path_factory.mktemp("artifacts")
    checkpoint = d / "model.sik"
    bank = d / "bank.ssb"
    save_model(model, checkpoint)
    save_bank(small_bank, bank)
    return {"checkpoint": str(checkpoint), "bank": str(bank)}


@pytest.fixture(scope="session")
def live_server(service_artifacts):
    import threading

    from shapeik.service import ServiceConfig, make_server

    config = ServiceConfig(checkpoint_path=service_artifacts["checkpoint"],
                           bank_path=service_artifacts["bank"], port=0)
    server = make_server(config)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    yield f"http://{host}:{port}"
    server.shutdown()
    server.server_close()
