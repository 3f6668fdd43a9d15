from django.apps import AppConfig


class StieltjesConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'stieltjes'
