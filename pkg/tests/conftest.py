import pytest

from fashionista.data import segment_epochs
from fashionista.model import Hyperparams, train
from fashionista.synth import SyntheticSpec, generate_synthetic


@pytest.fixture
def toy_model():
    """Tiny init-only model (iterations=0); tests may mutate it freely."""
    catalog, interactions, _ = generate_synthetic(
        SyntheticSpec(num_items=25, num_users=6, num_interactions=120, seed=42, F=16, K_true=4)
    )
    table = segment_epochs(interactions, "calendar_year")
    model = train(catalog, interactions, table, Hyperparams(K=4, L=3, iterations=0, seed=99))
    return model, catalog


@pytest.fixture(scope="session")
def small_trained():
    """Modestly trained model over a small corpus; treat as read-only."""
    catalog, interactions, truth = generate_synthetic(
        SyntheticSpec(num_items=80, num_users=16, num_interactions=900, seed=33)
    )
    table = segment_epochs(interactions, "calendar_year")
    model = train(catalog, interactions, table, Hyperparams(K=6, L=4, iterations=30000, seed=13))
    return model, catalog, interactions, table, truth
