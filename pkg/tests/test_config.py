from config import get_planner_config


def test_get_planner_config_defaults(monkeypatch):
    # Ensure no env vars are set
    monkeypatch.delenv('MAX_WORKERS', raising=False)
    monkeypatch.delenv('LOG_LEVEL', raising=False)
    monkeypatch.delenv('ORACLE_MAX_LAYERS', raising=False)

    cfg = get_planner_config()
    assert cfg['max_workers'] == 4
    assert cfg['log_level'] == 'INFO'
    assert cfg['oracle_max_layers'] == 20


def test_get_planner_config_env(monkeypatch):
    monkeypatch.setenv('MAX_WORKERS', '8')
    monkeypatch.setenv('LOG_LEVEL', 'debug')
    monkeypatch.setenv('ORACLE_MAX_LAYERS', '12')

    cfg = get_planner_config()
    assert cfg['max_workers'] == 8
    assert cfg['log_level'] == 'DEBUG'
    assert cfg['oracle_max_layers'] == 12


def test_get_planner_config_invalid_values_fall_back(monkeypatch):
    monkeypatch.setenv('MAX_WORKERS', 'many')
    monkeypatch.setenv('LOG_LEVEL', 'loud')
    monkeypatch.setenv('ORACLE_MAX_LAYERS', '0')

    cfg = get_planner_config()
    assert cfg['max_workers'] == 4
    assert cfg['log_level'] == 'INFO'
    assert cfg['oracle_max_layers'] == 20
