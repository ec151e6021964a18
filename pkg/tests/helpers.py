"""
Shared test reporting and tiny fixtures.

Test modules run as scripts (``python tests/src/test_x.py``) through
``run_tests``; their ``test_*`` functions take no arguments so pytest can
collect them too.
"""

import json
import sys
import traceback
from pathlib import Path
from typing import Callable, List, Tuple

import numpy as np

project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))


class Colors:
    """ANSI color codes for terminal output"""
    GREEN = '\033[92m'
    RED = '\033[91m'
    YELLOW = '\033[93m'
    BLUE = '\033[94m'
    BOLD = '\033[1m'
    RESET = '\033[0m'


def print_test_header(test_name: str):
    """Print a formatted test header"""
    print(f"\n{Colors.BOLD}{Colors.BLUE}{'='*60}{Colors.RESET}")
    print(f"{Colors.BOLD}{Colors.BLUE}TEST: {test_name}{Colors.RESET}")
    print(f"{Colors.BOLD}{Colors.BLUE}{'='*60}{Colors.RESET}")


def print_success(message: str):
    print(f"{Colors.GREEN}✓ {message}{Colors.RESET}")


def print_error(message: str):
    print(f"{Colors.RED}✗ {message}{Colors.RESET}")


def print_info(message: str):
    print(f"{Colors.YELLOW}ℹ {message}{Colors.RESET}")


def run_tests(title: str, tests: List[Callable[[], None]]) -> bool:
    """Run each test, print a PASS/FAIL summary, return True when all passed."""
    print(f"\n{Colors.BOLD}{Colors.BLUE}")
    print("=" * 60)
    print(title)
    print("=" * 60)
    print(f"{Colors.RESET}")

    results: List[Tuple[str, bool]] = []
    for test in tests:
        name = test.__name__
        print_test_header(name)
        try:
            test()
            print_success(name)
            results.append((name, True))
        except Exception as e:
            print_error(f"{name}: {type(e).__name__}: {e}")
            traceback.print_exc()
            results.append((name, False))

    print(f"\n{Colors.BOLD}{Colors.BLUE}{'='*60}{Colors.RESET}")
    print(f"{Colors.BOLD}Test Summary{Colors.RESET}")
    print(f"{Colors.BOLD}{Colors.BLUE}{'='*60}{Colors.RESET}\n")
    passed = sum(1 for _, ok in results if ok)
    for name, ok in results:
        status = f"{Colors.GREEN}PASS{Colors.RESET}" if ok else f"{Colors.RED}FAIL{Colors.RESET}"
        print(f"  {status}: {name}")
    print(f"\n{Colors.BOLD}Total: {passed}/{len(results)} tests passed{Colors.RESET}")
    return passed == len(results)


def tiny_model_config(family: str = "plain", num_classes: int = 3, size: int = 8, channels: int = 3):
    from app.src.model_zoo import ModelConfig
    return ModelConfig(family=family, width=1, num_classes=num_classes, input_shape=(size, size, channels))


def random_images(seed: int, count: int, size: int = 8, channels: int = 3) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 1.0, (count, size, size, channels))


def tiny_config_text(**overrides) -> str:
    """Flat config for an 8x8, 3-class, one-epoch run that finishes in seconds."""
    values = {
        "dataset.n_per_class": 12,
        "dataset.num_classes": 3,
        "dataset.height": 8,
        "dataset.width": 8,
        "dataset.measure_per_class": 8,
        "attack.ratio": 0.1,
        "train.epochs": 1,
        "train.batch_size": 16,
        "train.lr_drops": [],
        "measure.repeats": 1,
        "measure.projections": 8,
        "defense.grid": [[10, 1.0]],
        "defense.pool_size": 20,
        "defense.validation_size": 10,
        "defense.nc_steps": 2,
        "defense.nc_per_class": 4,
        "defense.nc_batch_size": 4,
        "defense.prune_fractions": [0.0, 0.5, 1.0],
    }
    values.update(overrides)
    return "".join(f"{key} = {json.dumps(value)}\n" for key, value in values.items())
