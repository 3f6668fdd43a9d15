"""
Django settings for the elliptic product lab.

Generated by 'django-admin startproject' using Django 4.2.11 and trimmed to
what a command-line numerical laboratory needs: no web stack, no database.

Environment variables are read from a `.env` file in the project root
(see `.env.example`).
"""
import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')

# Nothing is served or signed; Django still requires a key to boot.
SECRET_KEY = os.getenv('LAB_SECRET_KEY', 'lab-insecure-local-only')

DEBUG = os.getenv('LAB_DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'core',
    'ensemble',
    'spectra',
    'limitlaw',
    'stieltjes',
    'potential',
    'harness',
    'cli',
]

# Results go to files under the output directory, never to a database.
DATABASES = {}


# Lab settings

LAB_OUTPUT_DIR = Path(os.getenv('LAB_OUTPUT_DIR', BASE_DIR / 'out'))

LAB_THREADS = int(os.getenv('LAB_THREADS', '1'))

# Largest matrix dimension the dense eigen backend accepts.
LAB_EIG_MAX_N = int(os.getenv('LAB_EIG_MAX_N', '4096'))

LAB_DEFAULT_CONFIG_DIR = BASE_DIR / 'cli' / 'configs'


# Logging

LAB_LOG_LEVEL = os.getenv('LAB_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': LAB_LOG_LEVEL,
            'propagate': False,
        }
        for app in ('core', 'ensemble', 'spectra', 'limitlaw', 'stieltjes', 'potential', 'harness', 'cli')
    },
}


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
