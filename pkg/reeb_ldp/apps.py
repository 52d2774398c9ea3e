from django.apps import AppConfig


class ReebLdpConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "reeb_ldp"
    verbose_name = "Reeb graph large deviations"
