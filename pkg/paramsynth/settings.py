"""
Django settings for the paramsynth project.

The project has no web surface and no database; Django provides configuration,
logging and the management-command CLI for the ``synthesis`` app.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""
import os
from pathlib import Path
from dotenv import load_dotenv
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'paramsynth-local')

DEBUG = os.getenv('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'synthesis',
]

# No database: models are read from text files and results are written to files.
DATABASES = {}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

REST_FRAMEWORK = {
    'COERCE_DECIMAL_TO_STRING': True,
    'UNICODE_JSON': True,
    'COMPACT_JSON': False,
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'synthesis': {
            'handlers': ['console'],
            'level': os.getenv('PARAMSYNTH_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}

# Synthesis tunables. Library functions take these as keyword arguments;
# the values here are only the defaults.
PARAMSYNTH = {
    'SMT_COMMAND': os.getenv('PARAMSYNTH_SMT_CMD', 'z3 -in'),
    'SMT_TIMEOUT': float(os.getenv('PARAMSYNTH_SMT_TIMEOUT', '10')),
    'REGION_EPSILON': os.getenv('PARAMSYNTH_REGION_EPSILON', '1/100'),
    'VI_PRECISION': float(os.getenv('PARAMSYNTH_VI_PRECISION', '1e-8')),
    'VI_MAX_ITERATIONS': 100000,
    'PI_MAX_ITERATIONS': 10000,
    'STRATEGY_CAP': int(os.getenv('PARAMSYNTH_STRATEGY_CAP', '64')),
    'PARTITION': {
        'COVERAGE': os.getenv('PARAMSYNTH_PARTITION_COVERAGE', '0.95'),
        'GRID': int(os.getenv('PARAMSYNTH_PARTITION_GRID', '4')),
        'ENGINE': os.getenv('PARAMSYNTH_PARTITION_ENGINE', 'lifting'),
        'SPLITTER': os.getenv('PARAMSYNTH_PARTITION_SPLITTER', 'quads'),
        'SMT_FALLBACK_FRACTION': '1/1024',
        'MIN_REGION_FRACTION': '1/65536',
        'WORKERS': int(os.getenv('PARAMSYNTH_PARTITION_WORKERS', '1')),
        'MAX_ITERATIONS': int(os.getenv('PARAMSYNTH_PARTITION_MAX_ITERATIONS', '100000')),
        'BUDGET_SECONDS': float(os.getenv('PARAMSYNTH_PARTITION_BUDGET', '600')),
    },
}
