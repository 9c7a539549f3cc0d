from pathlib import Path
import os
from decouple import config


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


SECRET_KEY = config('SECRET_KEY', default='sde-toolkit-local-only')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    # DRF imports auth models at load time; no tables are ever created
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'transform',
    'driver',
    'timechange',
    'schemes',
    'analysis',
    'experiments',
]

# No persistence: every artifact is a file written by the experiments app.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Rendering only; there are no API views.
REST_FRAMEWORK = {
    'STRICT_JSON': True,
    'COMPACT_JSON': False,
}


#=====================toolkit config==========================
SDE_TOOLKIT = {
    # hard cap on s-grid steps before the time-change sampler gives up on a path
    'MAX_CLOCK_STEPS': config('SDE_MAX_CLOCK_STEPS', default=2**20, cast=int),
    'CLOCK_OVERSAMPLE': config('SDE_CLOCK_OVERSAMPLE', default=8, cast=int),
    'CLOCK_INTERPOLATION': config('SDE_CLOCK_INTERPOLATION', default='linear'),
    'WORKERS': config('SDE_WORKERS', default=1, cast=int),
    'GRONWALL_Z': config('SDE_GRONWALL_Z', default=3.0, cast=float),
    'OUTPUT_DIR': config('SDE_OUTPUT_DIR', default='runs'),
}


#=====================logger config==========================
LOG_LEVEL = config('SDE_LOG_LEVEL', default='INFO')
LOG_DIR = Path(config('SDE_LOG_DIR', default=str(BASE_DIR / 'logs')))
LOG_DIR.mkdir(parents=True, exist_ok=True)
(LOG_DIR / 'sde.log').touch(exist_ok=True)


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {asctime} {name} → {message}',
            'style': '{',
        },
        'detailed': {
            'format': '[%(asctime)s] %(levelname)s [%(name)s.%(funcName)s:%(lineno)d] %(message)s',
            'datefmt': '%d/%b/%Y %H:%M:%S',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
            'level': LOG_LEVEL,
        },
        'file': {
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': os.path.join(LOG_DIR, 'sde.log'),
            'maxBytes': 10*1024*1024,  # 10 MB
            'backupCount': 5,
            'formatter': 'detailed',
            'level': 'DEBUG',
        },
    },
    'loggers': {
        # Catch-all logger (for third-party apps)
        '': {
            'handlers': ['console', 'file'],
            'level': 'WARNING',
            'propagate': False,
        },
        **{
            app: {
                'handlers': ['console', 'file'],
                'level': LOG_LEVEL,
                'propagate': False,
            }
            for app in ('transform', 'driver', 'timechange', 'schemes', 'analysis', 'experiments')
        },
    },
}
