import os
import dotenv
from pathlib import Path


BASE_DIR = Path(__file__).resolve().parent.parent


dotenv.load_dotenv()


SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "lanemden-local-only")


DEBUG = os.getenv("DJANGO_DEBUG", "True") == "True"

ALLOWED_HOSTS = os.getenv("DJANGO_ALLOWED_HOSTS", "localhost").split(",")


INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",

    # Third party apps
    'rest_framework',

    # Local apps
    'core',
]


DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "db.sqlite3",
    }
}


LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        "core": {
            "handlers": ["console"],
            "level": os.getenv("LANE_EMDEN_LOG_LEVEL", "INFO"),
        },
    },
}


# Custom settings
LANE_EMDEN_CACHE_DIR = Path(os.getenv("LANE_EMDEN_CACHE_DIR", BASE_DIR / ".kernel_cache"))
LANE_EMDEN_OUTPUT_DIR = Path(os.getenv("LANE_EMDEN_OUTPUT_DIR", BASE_DIR / "runs"))

# SPD Dirichlet solves
LANE_EMDEN_LINEAR_TOL = float(os.getenv("LANE_EMDEN_LINEAR_TOL", "1e-10"))
LANE_EMDEN_CG_ITER_FACTOR = int(os.getenv("LANE_EMDEN_CG_ITER_FACTOR", "50"))
LANE_EMDEN_DIRECT_SOLVE_MAX_UNKNOWNS = int(os.getenv("LANE_EMDEN_DIRECT_SOLVE_MAX_UNKNOWNS", "20000"))

# Nonlinear iterations
LANE_EMDEN_NONLINEAR_TOL = float(os.getenv("LANE_EMDEN_NONLINEAR_TOL", "1e-8"))
LANE_EMDEN_NONLINEAR_MAX_ITER = int(os.getenv("LANE_EMDEN_NONLINEAR_MAX_ITER", "10000"))
LANE_EMDEN_MONOTONE_SLACK = float(os.getenv("LANE_EMDEN_MONOTONE_SLACK", "1e-12"))
