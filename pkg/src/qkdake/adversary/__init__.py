from .game import GameConfig, GameResult, TestOracle, run_game, test_query
from .network import Network, Transcript
from .offline import OfflineStats, offline_analyze
from .strategies import (InterceptResendStrategy, MitmForger, PassiveRelay, RandomnessReveal,
                         Strategy, build_strategy)

__all__ = ["GameConfig", "GameResult", "TestOracle", "run_game", "test_query", "Network",
           "Transcript", "OfflineStats", "offline_analyze", "InterceptResendStrategy",
           "MitmForger", "PassiveRelay", "RandomnessReveal", "Strategy", "build_strategy"]
