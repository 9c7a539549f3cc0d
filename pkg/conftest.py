import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'Sde_Main.settings')
django.setup()
