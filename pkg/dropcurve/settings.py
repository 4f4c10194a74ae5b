"""
Django settings for the dropcurve project.
Configuration for the dropout curriculum lab: run ledger database,
dataset/output locations and training defaults.
"""

from pathlib import Path
import os

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('SECRET_KEY', 'dropcurve-insecure-local-key')
DEBUG = False

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'lab',
]

# DATABASE CONFIGURATION - local run ledger
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('DROPCURVE_DB', str(BASE_DIR / 'dropcurve.sqlite3')),
    }
}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'COERCE_DECIMAL_TO_STRING': False,
}

# LAB CONFIGURATION
DROPCURVE = {
    'DATA_DIR': Path(os.environ.get('DROPCURVE_DATA_DIR', BASE_DIR / 'data')),
    'OUTPUT_DIR': Path(os.environ.get('DROPCURVE_OUTPUT_DIR', BASE_DIR / 'runs')),
    'EVAL_EVERY': 50,
    'LOG_EVERY': 1,
    'EVAL_BATCH': 1000,
    'TOP_K': 10,
    'BATCH_SIZE': 128,
    'LEARNING_RATE': 1e-4,
    'SEEDS': list(range(10)),
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'lab': {
            'handlers': ['console'],
            'level': os.environ.get('DROPCURVE_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
