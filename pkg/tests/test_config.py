# Copyright 2025 Liatrio
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import pytest

from triangle_stream.config import (
    env_overrides,
    load_config_file,
    resolve_config,
    resolve_jobs,
)
from triangle_stream.pipeline import Aggregation, Algorithm, ConfigError


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(
        "# pipeline defaults\nalgorithm = trifly\nk = 2\nbudget = 500  # per worker\n"
        "eager-zero = true\n",
        encoding="utf-8",
    )
    return path


class TestLoadConfigFile:
    """key = value files."""

    def test_reads_and_normalizes_keys(self, config_file):
        assert load_config_file(config_file) == {
            "algorithm": "trifly",
            "k": "2",
            "budget": "500",
            "eager_zero": "true",
        }

    def test_missing_equals(self, tmp_path):
        path = tmp_path / "bad.conf"
        path.write_text("k 2\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="expected key = value"):
            load_config_file(path)

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "dup.conf"
        path.write_text("k = 2\nk = 3\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="duplicate key"):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / "absent.conf")


class TestEnvOverrides:
    def test_prefixed_variables(self):
        environ = {
            "TRIANGLE_STREAM_K": "8",
            "TRIANGLE_STREAM_INSTRUMENT": "1",
            "TRIANGLE_STREAM_THETA": "  ",
            "K": "99",
        }
        assert env_overrides(environ) == {"k": "8", "instrumentation": "1"}


class TestResolveConfig:
    """Precedence: flags, environment, file, defaults."""

    def test_defaults(self):
        config = resolve_config(environ={})
        assert config.algorithm is Algorithm.COCOS_OPT
        assert config.k == 1

    def test_file_layer(self, config_file):
        config = resolve_config(config_path=config_file, environ={})
        assert config.algorithm is Algorithm.TRIFLY
        assert config.budget == 500
        assert config.eager_zero is True

    def test_env_beats_file(self, config_file):
        config = resolve_config(
            config_path=config_file, environ={"TRIANGLE_STREAM_K": "6"}
        )
        assert config.k == 6
        assert config.algorithm is Algorithm.TRIFLY

    def test_flags_beat_env(self, config_file):
        config = resolve_config(
            {"k": 3, "aggregation": "lazy", "budget": None},
            config_path=config_file,
            environ={"TRIANGLE_STREAM_K": "6"},
        )
        assert config.k == 3
        assert config.aggregation is Aggregation.LAZY
        assert config.budget == 500

    def test_invalid_env_value(self):
        with pytest.raises(ConfigError):
            resolve_config(environ={"TRIANGLE_STREAM_BUDGET": "1"})

    def test_unknown_file_key(self, tmp_path):
        path = tmp_path / "typo.conf"
        path.write_text("bugdet = 10\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="unknown configuration key"):
            resolve_config(config_path=path, environ={})


class TestResolveJobs:
    def test_default(self):
        assert resolve_jobs(environ={}) == 1

    def test_env(self):
        assert resolve_jobs(environ={"TRIANGLE_STREAM_JOBS": "4"}) == 4

    def test_flag_wins(self):
        assert resolve_jobs(2, environ={"TRIANGLE_STREAM_JOBS": "4"}) == 2

    @pytest.mark.parametrize(
        "environ", [{"TRIANGLE_STREAM_JOBS": "many"}, {"TRIANGLE_STREAM_JOBS": "0"}]
    )
    def test_invalid(self, environ):
        with pytest.raises(ConfigError):
            resolve_jobs(environ=environ)
