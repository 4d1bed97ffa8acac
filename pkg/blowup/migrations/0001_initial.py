# Generated by Django 5.1.2 on 2026-10-16 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SimulationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(help_text='Config file stem or a label given on the command line', max_length=200)),
                ('config_text', models.TextField(help_text='Normalized key=value configuration')),
                ('config_sha256', models.CharField(db_index=True, max_length=64)),
                ('outcome', models.CharField(choices=[('reached_T', 'Reached T'), ('blew_up', 'Blew up'), ('decayed', 'Decayed'), ('steady', 'Steady'), ('error', 'Error')], max_length=20)),
                ('t_star', models.FloatField(blank=True, help_text='Blow-up time, when the run blew up', null=True)),
                ('t_final', models.FloatField(blank=True, null=True)),
                ('steps', models.PositiveIntegerField(default=0)),
                ('t1', models.FloatField(blank=True, help_text='Guaranteed existence time (empty means unbounded)', null=True)),
                ('bound_discrete', models.FloatField(blank=True, help_text='Upper bound on the numerical blow-up time', null=True)),
                ('bound_continuous', models.FloatField(blank=True, null=True)),
                ('theta', models.FloatField(blank=True, help_text='Limit amplitude in the critical regime', null=True)),
                ('sup_u_final', models.FloatField(blank=True, null=True)),
                ('sup_v_final', models.FloatField(blank=True, null=True)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('error_message', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at', '-id'],
                'indexes': [models.Index(fields=['outcome', '-created_at'], name='blowup_run_outcome_idx')],
            },
        ),
    ]
