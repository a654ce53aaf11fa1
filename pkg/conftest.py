import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'paramsynth.settings')
django.setup()
