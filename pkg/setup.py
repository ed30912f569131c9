"""
Setup script for the knownmix environment
Creates virtual environment and installs dependencies
"""

import subprocess
import sys
from pathlib import Path

ENV_NAME = "knownmix_env"


def run_command(cmd, shell=True):
    """Run a command and print output"""
    print(f"\n>>> {cmd}")
    result = subprocess.run(cmd, shell=shell, capture_output=True, text=True)
    if result.stdout:
        print(result.stdout)
    if result.returncode != 0 and result.stderr:
        print(f"Error: {result.stderr}")
        return False
    return True


def env_bin(env_path: Path) -> Path:
    return env_path / ("Scripts" if sys.platform == "win32" else "bin")


def main():
    base_path = Path(__file__).parent
    env_path = base_path / ENV_NAME

    print("=" * 60)
    print("KNOWNMIX ENVIRONMENT SETUP")
    print("=" * 60)

    print(f"\n[1/3] Creating virtual environment '{ENV_NAME}'...")
    if not run_command(f'"{sys.executable}" -m venv "{env_path}"'):
        print("Failed to create virtual environment")
        return 1

    python_path = env_bin(env_path) / "python"
    print("\n[2/3] Upgrading pip...")
    if not run_command(f'"{python_path}" -m pip install --upgrade pip'):
        print("Failed to upgrade pip")
        return 1

    print("\n[3/3] Installing dependencies...")
    req_path = base_path / "requirements.txt"
    if not run_command(f'"{python_path}" -m pip install -r "{req_path}"'):
        print("Failed to install requirements")
        return 1

    print("\n" + "=" * 60)
    print("SETUP COMPLETE!")
    print("=" * 60)
    print("\nTo activate the environment:")
    print(f"  source {ENV_NAME}/bin/activate")
    print("\nTo fit a simulated sample:")
    print("  python cli.py fit --scenario WOn --pi0 0.7 --n 1000")
    print("\nTo run the fast test suite:")
    print("  pytest")
    print("=" * 60)
    return 0


if __name__ == "__main__":
    sys.exit(main())
