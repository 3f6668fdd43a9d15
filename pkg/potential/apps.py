from django.apps import AppConfig


class PotentialConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'potential'
