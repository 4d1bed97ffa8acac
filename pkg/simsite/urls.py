"""
URL configuration for simsite.

Only the admin and the read-only run ledger are exposed over HTTP.
"""
from django.contrib import admin
from django.urls import include, path

urlpatterns = [
    path('admin/', admin.site.urls),
    path('api/', include('blowup.urls')),
]
