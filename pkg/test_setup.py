#!/usr/bin/env python3
"""
Setup check for the Riesz laboratory
"""

import sys
from pathlib import Path


def test_imports():
    """Test that all required packages can be imported"""
    print("🔍 Testing imports...")

    for name in ("numpy", "scipy", "sympy", "fastapi", "uvicorn", "pydantic", "dotenv"):
        try:
            __import__(name)
            print(f"✅ {name} imported successfully")
        except ImportError as e:
            print(f"❌ {name} import failed: {e}")
            return False

    return True


def test_project_structure():
    """Test that project structure is correct"""
    print("\n📁 Testing project structure...")

    required_files = [
        "main.py",
        "pyproject.toml",
        "env.example",
        "src/__init__.py",
        "src/group/group_core.py",
        "src/quadrature/quadrature.py",
        "src/algebra/term_algebra.py",
        "src/kernels/kernels.py",
        "src/hardy/cz_hardy.py",
        "src/experiments/runner.py",
        "src/experiments/cli.py",
        "src/utils/config.py",
        "src/utils/errors.py",
    ]

    missing_files = [path for path in required_files if not Path(path).exists()]
    for path in required_files:
        if path not in missing_files:
            print(f"✅ {path} exists")

    if missing_files:
        print(f"❌ Missing files: {missing_files}")
        return False

    return True


def test_environment():
    """Test environment configuration"""
    print("\n⚙️ Testing environment configuration...")

    if Path(".env").exists():
        print("✅ .env file exists")
    else:
        print("⚠️  .env file not found - defaults apply (see env.example)")

    python_version = sys.version_info
    if python_version < (3, 12):
        print(f"❌ Python version {python_version.major}.{python_version.minor} is too old. Need 3.12+")
        return False
    print(f"✅ Python version {python_version.major}.{python_version.minor} is compatible")

    from src.utils.config import Config
    if not Config().validate_config():
        print("❌ RIESZLAB_* settings are invalid")
        return False
    print("✅ RIESZLAB_* settings are valid")
    return True


def test_components():
    """Smoke-test the numerical core"""
    print("\n🧪 Testing components...")

    try:
        from src.group.group_core import GroupPoint, radius
        r = float(radius(GroupPoint(1.0, 0.0, 1.0)))
        print(f"✅ Distance from the identity to (1, 0, 1): {r:.6f}")
    except Exception as e:
        print(f"❌ Group geometry failed: {e}")
        return False

    try:
        from src.experiments.runner import expand
        psi = expand(0, 0, order=4)["psi"]
        print(f"✅ Kernel expansion for k_00: alpha={psi['alpha']:.6f}, beta={psi['beta']:.6f}")
    except Exception as e:
        print(f"❌ Kernel expansion failed: {e}")
        return False

    return True


def main():
    """Run all checks"""
    print("🚀 Riesz Laboratory Setup Test")
    print("=" * 50)

    if not test_imports():
        print("\n❌ Import tests failed. Please install dependencies with: poetry install")
        return False

    if not test_project_structure():
        print("\n❌ Project structure test failed.")
        return False

    if not test_environment():
        print("\n❌ Environment test failed.")
        return False

    if not test_components():
        print("\n❌ Component test failed.")
        return False

    print("\n🎉 All checks passed! The laboratory is ready to use.")
    print("\nNext steps:")
    print("1. Copy env.example to .env and adjust RIESZLAB_* settings")
    print("2. Run: rieszlab verify metric")
    print("3. Run: python main.py to start the HTTP surface")

    return True


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
