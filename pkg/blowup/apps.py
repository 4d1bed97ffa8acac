from django.apps import AppConfig


class BlowupConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'blowup'
    verbose_name = 'Parabolic blow-up solver'
