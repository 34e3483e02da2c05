from __future__ import annotations

import threading
import time

from autopatch.analyzer import AnalyzerConfig
from autopatch.harness import ToolchainConfig
from autopatch.prompting import LlmClient, LlmConfig


def test_analyzer_config_env_overrides(monkeypatch):
    monkeypatch.setenv("AUTOPATCH_ANALYZER_PATH", "/opt/llvm/bin/clang")
    monkeypatch.setenv("AUTOPATCH_ANALYZER_FLAGS", "-I/opt/include -DFOO=1")
    config = AnalyzerConfig.from_env()
    assert config.binary == "/opt/llvm/bin/clang"
    assert config.extra_flags == ("-I/opt/include", "-DFOO=1")


def test_analyzer_config_defaults(monkeypatch):
    monkeypatch.delenv("AUTOPATCH_ANALYZER_PATH", raising=False)
    monkeypatch.delenv("AUTOPATCH_ANALYZER_FLAGS", raising=False)
    config = AnalyzerConfig.from_env()
    assert config.binary == "clang"
    assert config.extra_flags == ()
    assert config.function == "main"
    assert config.dump_stream == "stderr"


def test_toolchain_config_env_overrides(monkeypatch):
    monkeypatch.setenv("AUTOPATCH_CXX", "clang++")
    monkeypatch.setenv("AUTOPATCH_CXXFLAGS", "-O3 -march=native")
    config = ToolchainConfig.from_env()
    assert config.compiler == "clang++"
    assert config.flags == ("-O3", "-march=native")


def test_toolchain_config_defaults(monkeypatch):
    monkeypatch.delenv("AUTOPATCH_CXX", raising=False)
    monkeypatch.delenv("AUTOPATCH_CXXFLAGS", raising=False)
    config = ToolchainConfig.from_env()
    assert config.compiler == "g++"
    assert config.flags == ("-O2", "-std=c++17")


def test_llm_config_env(monkeypatch):
    monkeypatch.setenv("AUTOPATCH_LLM_BASE", "http://svc/chat")
    monkeypatch.setenv("AUTOPATCH_LLM_KEY", "secret")
    monkeypatch.setenv("AUTOPATCH_LLM_MODEL", "tuned-model")
    config = LlmConfig.from_env()
    assert config.base_url == "http://svc/chat"
    assert config.api_key == "secret"
    assert config.model == "tuned-model"
    assert config.temperature == 0.0


def test_llm_client_bounds_in_flight_requests():
    active = []
    peak = []
    lock = threading.Lock()

    def slow_transport(request):
        with lock:
            active.append(1)
            peak.append(len(active))
        time.sleep(0.02)
        with lock:
            active.pop()
        return {"choices": [{"message": {"content": "x"}}]}

    client = LlmClient(
        LlmConfig(model="m"), mode="live", transport=slow_transport, max_in_flight=2
    )
    threads = [
        threading.Thread(target=client.complete, args=("s", f"u{i}")) for i in range(8)
    ]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert max(peak) <= 2
    assert len(peak) == 8
