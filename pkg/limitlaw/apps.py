from django.apps import AppConfig


class LimitlawConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'limitlaw'
