import json
from pathlib import Path

import pytest

from rola.presets import PRESETS, get_preset
from rola.trainer.config import ExperimentConfig, load_config_file

TABLES = json.loads((Path(__file__).parent / "data" / "preset_tables.json").read_text())

ROWS = {
    "Training Episodes": "training_episodes",
    "Actor learning rate": "actor_lr",
    "Critic learning rate": "critic_lr",
    "Episodes per train": "episodes_per_train",
    "Target-net update freq (episode)": "target_update_freq",
    "N-step TD": "n_step",
    "Num centralized critic update": "num_centralized_critic_updates",
    "Num local critic update": "num_local_critic_updates",
    r"$\epsilon_{\text{start}}$": "eps_start",
    r"$\epsilon_{\text{end}}$": "eps_end",
    r"$\epsilon_{\text{decay}}$ (episode)": "eps_decay",
    r"TD$(\lambda)$": "td_lambda",
}
TASKS = {"Capture Target 6x6": "capture-6x6", "Capture Target 8x8": "capture-8x8",
         "Box Pushing 6x6": "boxpush-6x6", "Box Pushing 10x10": "boxpush-10x10"}
COLUMNS = {"ROLA": ["rola", "eca"], "COMA": ["coma"], "Central-V": ["central-v"], "IA2C": ["ia2c"]}


def table_cells():
    for table, task in TASKS.items():
        for column, algs in COLUMNS.items():
            for alg in algs:
                yield f"{alg}-{task}", TABLES[table][column]


def check_preset(name, column):
    """Compare one preset against its transcribed table column; returns mismatches."""
    preset = get_preset(name)
    cfg = preset.config()
    bad = []
    for row, field in ROWS.items():
        cell = column[row]
        if cell == "N/A":
            if field in preset.values:
                bad.append((field, "N/A", preset.values[field]))
        elif getattr(cfg, field) != float(cell):
            bad.append((field, cell, getattr(cfg, field)))
    return bad


@pytest.mark.parametrize("name,column", list(table_cells()), ids=[n for n, _ in table_cells()])
def test_preset_matches_table(name, column):
    assert check_preset(name, column) == []


def test_every_table_preset_is_covered():
    covered = {n for n, _ in table_cells()}
    assert covered | {"rola-matrix-2x2"} == set(PRESETS)


def test_named_examples():
    cap = get_preset("rola-capture-6x6").config()
    assert (cap.actor_lr, cap.critic_lr, cap.episodes_per_train, cap.target_update_freq, cap.n_step) == \
        (5e-4, 5e-4, 2, 16, 3)
    assert (cap.eps_start, cap.eps_end, cap.eps_decay, cap.training_episodes) == (1.0, 0.05, 15_000, 100_000)
    box = get_preset("rola-boxpush-6x6").config()
    assert (box.actor_lr, box.critic_lr, box.n_step, box.num_local_critic_updates) == (1e-3, 3e-3, 3, 4)
    assert (box.eps_end, box.eps_decay, box.training_episodes, box.target_update_freq) == (0.01, 2_000, 4_000, 32)


def test_coma_presets_use_lambda():
    assert get_preset("coma-capture-6x6").config().td_lambda == 0.3
    assert get_preset("coma-boxpush-10x10").config().td_lambda == 0.4


def test_eca_flagged():
    eca = get_preset("eca-capture-8x8")
    assert "ROLA" in eca.notes
    rola = get_preset("rola-capture-8x8")
    assert {k: v for k, v in eca.values.items() if k != "algorithm"} == \
        {k: v for k, v in rola.values.items() if k != "algorithm"}


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_round_trip_through_config_file(name, tmp_path):
    cfg = get_preset(name).config()
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    assert ExperimentConfig(**load_config_file(path)) == cfg


def test_gamma_override():
    preset = get_preset("central-v-boxpush-10x10")
    base, changed = preset.config(), preset.config(gamma=0.95)
    assert changed.gamma == 0.95
    assert changed.replace(gamma=base.gamma) == base


def test_unknown_preset_lists_names():
    with pytest.raises(KeyError, match="rola-capture-6x6"):
        get_preset("rola-capture-7x7")
