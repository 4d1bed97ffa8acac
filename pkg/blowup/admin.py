from django.contrib import admin
from .models import SimulationRun


@admin.register(SimulationRun)
class SimulationRunAdmin(admin.ModelAdmin):
    list_display = ['name', 'outcome', 't_star', 'bound_discrete', 't_final', 'steps', 'created_at']
    list_filter = ['outcome', 'created_at']
    search_fields = ['name', 'config_sha256', 'config_text', 'error_message']
    readonly_fields = ['config_sha256', 'created_at']
